#include "merge_arena/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace merge_arena {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

class Context {
 public:
  Context(const ConfigFile& file, const ConfigEntry& e) : file_(file), e_(e) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(file_.source + ":" + std::to_string(e_.line) + ": " + e_.section + "." +
                      e_.key + ": " + what);
  }

  double number(const std::string& text) const {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("expected a number, got '" + text + "'");
    return v;
  }
  double number() const { return number(e_.value); }

  long long integer() const {
    long long v = 0;
    const auto* end = e_.value.data() + e_.value.size();
    const auto [ptr, ec] = std::from_chars(e_.value.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("expected an integer, got '" + e_.value + "'");
    return v;
  }

  bool boolean() const {
    if (e_.value == "true" || e_.value == "1" || e_.value == "yes") return true;
    if (e_.value == "false" || e_.value == "0" || e_.value == "no") return false;
    fail("expected true or false, got '" + e_.value + "'");
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const auto& item : split_list(e_.value)) out.push_back(number(item));
    if (out.empty()) fail("expected a comma-separated list");
    return out;
  }

  std::pair<double, double> range() const {
    const auto v = numbers();
    if (v.size() != 2 || v[0] > v[1]) fail("expected 'lo, hi' with lo <= hi");
    return {v[0], v[1]};
  }

  const std::string& text() const { return e_.value; }

 private:
  const ConfigFile& file_;
  const ConfigEntry& e_;
};

using Setter = std::function<void(const Context&)>;
using Table = std::map<std::string, std::map<std::string, Setter>>;

void add_sim(Table& t, SimParams& sim) {
  auto& s = t["sim"];
  s["dt"] = [&](const Context& c) { sim.dt = c.number(); };
  s["accel_min"] = [&](const Context& c) { sim.accel_min = c.number(); };
  s["accel_max"] = [&](const Context& c) { sim.accel_max = c.number(); };
  s["test_vehicle_length"] = [&](const Context& c) { sim.test_vehicle_length = c.number(); };
  s["max_steps"] = [&](const Context& c) { sim.max_steps = static_cast<int>(c.integer()); };
  s["settle_window"] = [&](const Context& c) { sim.settle_window = c.number(); };
}

void add_grid(Table& t, TestGrid& grid) {
  auto& g = t["grid"];
  g["ramp_lengths"] = [&](const Context& c) { grid.ramp_lengths = c.numbers(); };
  g["start_differentials"] = [&](const Context& c) { grid.start_differentials = c.numbers(); };
  g["gaps"] = [&](const Context& c) { grid.gaps = c.numbers(); };
  g["policies"] = [&](const Context& c) {
    grid.policies.clear();
    for (const auto& item : split_list(c.text())) {
      try {
        grid.policies.push_back(parse_traffic_policy(item));
      } catch (const ConfigError& e) {
        c.fail(e.what());
      }
    }
  };
  g["episodes_per_cell"] = [&](const Context& c) {
    grid.episodes_per_cell = static_cast<int>(c.integer());
  };
  g["tiv"] = [&](const Context& c) { grid.tiv_test = c.number(); };
  g["initial_speed"] = [&](const Context& c) { grid.initial_speed = c.number(); };
  g["seed"] = [&](const Context& c) { grid.seed = static_cast<std::uint64_t>(c.integer()); };
}

void run_table(const ConfigFile& file, const Table& table, bool strict) {
  for (const auto& e : file.entries) {
    const Context c(file, e);
    const auto sec = table.find(e.section);
    if (sec == table.end()) {
      if (strict) c.fail("unknown section");
      continue;
    }
    const auto key = sec->second.find(e.key);
    if (key == sec->second.end()) {
      if (strict) c.fail("unknown key");
      continue;
    }
    key->second(c);
  }
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
  return out;
}

std::string pair_text(const std::pair<double, double>& p) { return num(p.first) + ", " + num(p.second); }

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
  ConfigFile file;
  file.source = source;
  std::string section;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        throw ConfigError(source + ":" + std::to_string(line) + ": malformed section header");
      }
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    if (section.empty()) {
      throw ConfigError(source + ":" + std::to_string(line) + ": key outside of any [section]");
    }
    ConfigEntry e{section, trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line};
    if (e.key.empty() || e.value.empty()) {
      throw ConfigError(source + ":" + std::to_string(line) + ": empty key or value");
    }
    file.entries.push_back(std::move(e));
  }
  return file;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigFileMissing(path);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  return parse(in, path.string());
}

bool ConfigFile::has_section(const std::string& section) const {
  for (const auto& e : entries) {
    if (e.section == section) return true;
  }
  return false;
}

std::optional<Variant> config_variant(const ConfigFile& file) {
  std::optional<Variant> out;
  for (const auto& e : file.entries) {
    if (e.section != "scene" || e.key != "variant") continue;
    try {
      out = parse_variant(e.value);
    } catch (const ConfigError& err) {
      Context(file, e).fail(err.what());
    }
  }
  return out;
}

void apply_config(const ConfigFile& file, TrainConfig& cfg) {
  Table t;
  add_sim(t, cfg.sim);
  add_grid(t, cfg.summary_grid);

  auto& scene = t["scene"];
  scene["variant"] = [&](const Context& c) {
    try {
      cfg.variant = parse_variant(c.text());
    } catch (const ConfigError& e) {
      c.fail(e.what());
    }
    cfg.scene.variant = cfg.variant;
  };
  scene["merge_length"] = [&](const Context& c) { cfg.scene.merge_length = c.number(); };
  scene["traffic_count"] = [&](const Context& c) {
    cfg.scene.traffic_count = static_cast<int>(c.integer());
  };
  scene["regenerate"] = [&](const Context& c) { cfg.scene.regenerate = c.boolean(); };

  auto& ranges = t["ranges"];
  ranges["ramp_length"] = [&](const Context& c) { cfg.ranges.ramp_length = c.range(); };
  ranges["start_differential"] = [&](const Context& c) { cfg.ranges.start_differential = c.range(); };
  ranges["initial_speed"] = [&](const Context& c) { cfg.ranges.initial_speed = c.range(); };
  ranges["traffic_length"] = [&](const Context& c) { cfg.ranges.traffic_length = c.range(); };
  ranges["tiv"] = [&](const Context& c) { cfg.ranges.tiv = c.range(); };
  ranges["lead_merge_offset"] = [&](const Context& c) { cfg.ranges.lead_merge_offset = c.range(); };

  auto& reward = t["reward"];
  reward["merge_success"] = [&](const Context& c) { cfg.reward.merge_success = c.number(); };
  reward["at_fault_collision"] = [&](const Context& c) { cfg.reward.at_fault_collision = c.number(); };
  reward["no_fault_collision"] = [&](const Context& c) { cfg.reward.no_fault_collision = c.number(); };
  reward["action_penalty_scale"] = [&](const Context& c) {
    cfg.reward.action_penalty_scale = c.number();
  };
  reward["reward_scale"] = [&](const Context& c) { cfg.reward.reward_scale = c.number(); };

  auto& ddpg = t["ddpg"];
  ddpg["lr_actor"] = [&](const Context& c) { cfg.hyper.lr_actor = c.number(); };
  ddpg["lr_critic"] = [&](const Context& c) { cfg.hyper.lr_critic = c.number(); };
  ddpg["gamma"] = [&](const Context& c) { cfg.hyper.gamma = c.number(); };
  ddpg["batch"] = [&](const Context& c) { cfg.hyper.batch = static_cast<int>(c.integer()); };
  ddpg["replay_capacity"] = [&](const Context& c) { cfg.hyper.capacity = static_cast<int>(c.integer()); };
  ddpg["tau"] = [&](const Context& c) { cfg.hyper.tau = c.number(); };
  ddpg["noise_sigma"] = [&](const Context& c) { cfg.hyper.noise_sigma0 = c.number(); };
  ddpg["noise_decay"] = [&](const Context& c) { cfg.hyper.noise_decay = c.number(); };

  auto& train = t["train"];
  train["episodes"] = [&](const Context& c) { cfg.total_episodes = c.integer(); };
  train["checkpoint_every"] = [&](const Context& c) { cfg.checkpoint_every = c.integer(); };
  train["curve_log_every"] = [&](const Context& c) { cfg.curve_log_every = c.integer(); };
  train["seed"] = [&](const Context& c) { cfg.seed = static_cast<std::uint64_t>(c.integer()); };
  train["write_summaries"] = [&](const Context& c) { cfg.write_summaries = c.boolean(); };
  train["episode_log"] = [&](const Context& c) { cfg.write_episode_log = c.boolean(); };

  // The variant decides grid defaults, so it is applied before everything else.
  if (const auto v = config_variant(file)) {
    const auto grid_seed = cfg.summary_grid.seed;
    cfg.variant = *v;
    cfg.scene.variant = *v;
    cfg.summary_grid = TestGrid::defaults(*v);
    cfg.summary_grid.seed = grid_seed;
  }
  run_table(file, t, true);
}

void apply_grid_config(const ConfigFile& file, TestGrid& grid, SimParams& sim) {
  Table t;
  add_sim(t, sim);
  add_grid(t, grid);
  run_table(file, t, false);
}

std::string render_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "[scene]\n"
     << "variant = " << to_string(cfg.variant) << '\n'
     << "merge_length = " << num(cfg.scene.merge_length) << '\n'
     << "traffic_count = " << cfg.scene.traffic_count << '\n'
     << "regenerate = " << (cfg.scene.regenerate ? "true" : "false") << "\n\n";
  os << "[sim]\n"
     << "dt = " << num(cfg.sim.dt) << '\n'
     << "accel_min = " << num(cfg.sim.accel_min) << '\n'
     << "accel_max = " << num(cfg.sim.accel_max) << '\n'
     << "test_vehicle_length = " << num(cfg.sim.test_vehicle_length) << '\n'
     << "max_steps = " << cfg.sim.max_steps << '\n'
     << "settle_window = " << num(cfg.sim.settle_window) << "\n\n";
  os << "[ranges]\n"
     << "ramp_length = " << pair_text(cfg.ranges.ramp_length) << '\n'
     << "start_differential = " << pair_text(cfg.ranges.start_differential) << '\n'
     << "initial_speed = " << pair_text(cfg.ranges.initial_speed) << '\n'
     << "traffic_length = " << pair_text(cfg.ranges.traffic_length) << '\n'
     << "tiv = " << pair_text(cfg.ranges.tiv) << '\n'
     << "lead_merge_offset = " << pair_text(cfg.ranges.lead_merge_offset) << "\n\n";
  os << "[reward]\n"
     << "merge_success = " << num(cfg.reward.merge_success) << '\n'
     << "at_fault_collision = " << num(cfg.reward.at_fault_collision) << '\n'
     << "no_fault_collision = " << num(cfg.reward.no_fault_collision) << '\n'
     << "action_penalty_scale = " << num(cfg.reward.action_penalty_scale) << '\n'
     << "reward_scale = " << num(cfg.reward.reward_scale) << "\n\n";
  os << "[ddpg]\n"
     << "lr_actor = " << num(cfg.hyper.lr_actor) << '\n'
     << "lr_critic = " << num(cfg.hyper.lr_critic) << '\n'
     << "gamma = " << num(cfg.hyper.gamma) << '\n'
     << "batch = " << cfg.hyper.batch << '\n'
     << "replay_capacity = " << cfg.hyper.capacity << '\n'
     << "tau = " << num(cfg.hyper.tau) << '\n'
     << "noise_sigma = " << num(cfg.hyper.noise_sigma0) << '\n'
     << "noise_decay = " << num(cfg.hyper.noise_decay) << "\n\n";
  os << "[train]\n"
     << "episodes = " << cfg.total_episodes << '\n'
     << "checkpoint_every = " << cfg.checkpoint_every << '\n'
     << "curve_log_every = " << cfg.curve_log_every << '\n'
     << "seed = " << cfg.seed << '\n'
     << "write_summaries = " << (cfg.write_summaries ? "true" : "false") << '\n'
     << "episode_log = " << (cfg.write_episode_log ? "true" : "false") << "\n\n";
  std::string policies;
  for (std::size_t i = 0; i < cfg.summary_grid.policies.size(); ++i) {
    policies += (i ? ", " : "") + std::string(to_string(cfg.summary_grid.policies[i]));
  }
  os << "[grid]\n"
     << "ramp_lengths = " << list(cfg.summary_grid.ramp_lengths) << '\n'
     << "start_differentials = " << list(cfg.summary_grid.start_differentials) << '\n'
     << "gaps = " << list(cfg.summary_grid.gaps) << '\n'
     << "policies = " << policies << '\n'
     << "episodes_per_cell = " << cfg.summary_grid.episodes_per_cell << '\n'
     << "tiv = " << num(cfg.summary_grid.tiv_test) << '\n'
     << "initial_speed = " << num(cfg.summary_grid.initial_speed) << '\n'
     << "seed = " << cfg.summary_grid.seed << '\n';
  return os.str();
}

}  // namespace merge_arena
