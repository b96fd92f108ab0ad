#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace merge_arena {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingFile = 2;

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> variant;
  std::optional<long long> episodes;
  std::optional<double> decay;
  std::optional<std::uint64_t> seed;
  std::optional<long long> checkpoint_every;
  std::optional<double> reward_scale;
  std::filesystem::path out_dir = "run";
  bool sweep_decay = false;
  bool resume = false;
  bool no_summaries = false;
  int jobs = 1;
};

struct EvaluateOptions {
  std::filesystem::path merge_checkpoint;
  std::filesystem::path traffic_checkpoint;
  std::optional<std::filesystem::path> grid_config;
  std::optional<std::vector<double>> gaps;
  std::string policy = "mixture";  // mixture, constant, random or reactive
  std::optional<int> episodes_per_cell;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  std::filesystem::path out_dir = "eval";
  int jobs = 1;
};

struct OracleOptions {
  std::optional<std::filesystem::path> grid_config;
  std::optional<std::vector<double>> gaps;
  std::optional<std::vector<double>> ramps;
  std::optional<std::vector<double>> differentials;
  std::string mode = "cooperative";  // cooperative or constant
  bool fine = false;
  std::filesystem::path out_dir = "oracle";
  int jobs = 1;
};

struct SelectBestOptions {
  std::filesystem::path summaries_dir;
  std::string metric = "collisions";
  std::optional<std::filesystem::path> plot_data;
};

struct ExportCurvesOptions {
  std::filesystem::path input;  // episode_rewards.csv or the run directory holding it
  std::filesystem::path output = "curves_export.csv";
  long long every = 1000;
  std::size_t window = 10;
};

// Seed precedence: explicit flag, then MERGE_ARENA_SEED, then the config value.
std::optional<std::uint64_t> seed_from_environment();

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& err);
int cmd_select_best(const SelectBestOptions& opts, std::ostream& out, std::ostream& err);
int cmd_export_curves(const ExportCurvesOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace merge_arena
