#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "merge_arena/evaluation.hpp"
#include "merge_arena/training.hpp"

namespace merge_arena {

// Raised when a config path does not exist (the CLI maps it to exit code 2).
class ConfigFileMissing : public ConfigError {
 public:
  explicit ConfigFileMissing(const std::filesystem::path& path)
      : ConfigError("config file not found: " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

// INI-style text: "[section]" headers, "key = value" lines, '#' or ';' comments.
struct ConfigFile {
  std::string source;  // file name used in error messages
  std::vector<ConfigEntry> entries;

  static ConfigFile parse(std::istream& in, const std::string& source);
  static ConfigFile load(const std::filesystem::path& path);
  bool has_section(const std::string& section) const;
};

// Variant named in [scene] variant, if present.
std::optional<Variant> config_variant(const ConfigFile& file);

// Unknown sections or keys and malformed values throw ConfigError naming source:line.
void apply_config(const ConfigFile& file, TrainConfig& cfg);
// Only the [grid] and [sim] sections are read; everything else is ignored.
void apply_grid_config(const ConfigFile& file, TestGrid& grid, SimParams& sim);

// Canonical text of every field except out_dir; re-parsing it restores the config.
std::string render_config(const TrainConfig& cfg);

}  // namespace merge_arena
