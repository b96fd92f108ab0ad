#include "merge_arena/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "merge_arena/checkpoint.hpp"
#include "merge_arena/config.hpp"
#include "merge_arena/evaluation.hpp"
#include "merge_arena/oracle.hpp"
#include "merge_arena/training.hpp"

namespace merge_arena {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw MissingInput(what + " not found: " + path.string());
}

// Maps exceptions to exit codes and one-line messages.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigFileMissing& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const MissingInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json artifact_list(const std::vector<fs::path>& paths) {
  json list = json::array();
  for (const auto& p : paths) list.push_back(p.string());
  return list;
}

TrainConfig build_train_config(const TrainOptions& opts) {
  std::optional<ConfigFile> file;
  if (opts.config) file = ConfigFile::load(*opts.config);

  Variant variant = Variant::three_vehicle;
  if (file) {
    if (const auto v = config_variant(*file)) variant = *v;
  }
  if (opts.variant) variant = parse_variant(*opts.variant);

  TrainConfig cfg = TrainConfig::defaults(variant);
  if (file) {
    apply_config(*file, cfg);
    if (cfg.variant != variant) {
      // The flag wins; grid axes follow the variant unless the file set them.
      cfg.variant = variant;
      cfg.scene.variant = variant;
      if (!file->has_section("grid")) cfg.summary_grid = TestGrid::defaults(variant);
    }
  }
  if (const auto env = seed_from_environment()) cfg.seed = *env;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.episodes) cfg.total_episodes = *opts.episodes;
  if (opts.decay) cfg.hyper.noise_decay = *opts.decay;
  if (opts.checkpoint_every) cfg.checkpoint_every = *opts.checkpoint_every;
  if (opts.reward_scale) cfg.reward.reward_scale = *opts.reward_scale;
  if (opts.no_summaries) cfg.write_summaries = false;
  cfg.out_dir = opts.out_dir;
  cfg.eval_jobs = std::max(1, opts.jobs);
  cfg.validate();
  return cfg;
}

json run_training(const TrainConfig& cfg, bool resume, std::ostream* progress) {
  fs::create_directories(cfg.out_dir);
  const auto started = utc_now();
  const auto result = resume ? resume_training(cfg, progress) : train(cfg, progress);
  auto artifacts = result.artifacts;
  const auto config_path = cfg.out_dir / "config.ini";
  {
    std::ofstream out(config_path);
    out << render_config(cfg);
    if (!out) throw std::runtime_error("cannot write " + config_path.string());
  }
  artifacts.push_back(config_path);
  const auto manifest_path = cfg.out_dir / "manifest.json";
  artifacts.push_back(manifest_path);

  json m;
  m["command"] = resume ? "train --resume" : "train";
  m["version"] = kVersion;
  m["seed"] = cfg.seed;
  m["config_hash"] = config_hash(cfg);
  m["config"] = render_config(cfg);
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["episodes"] = result.episodes;
  m["mean_steps"] = result.mean_steps();
  m["merge_updates"] = result.merge_updates;
  m["traffic_updates"] = result.traffic_updates;
  json checkpoints = json::array();
  for (const auto& c : result.checkpoints) {
    json entry{{"episode", c.episode}, {"merge", c.merge_path.string()}, {"traffic", c.traffic_path.string()}};
    if (c.summary_path) entry["summary"] = c.summary_path->string();
    checkpoints.push_back(entry);
  }
  m["checkpoints"] = checkpoints;
  m["artifacts"] = artifact_list(artifacts);
  write_json(manifest_path, m);
  return m;
}

std::vector<std::filesystem::path> per_gap_files(const fs::path& dir, const CollisionTable& table,
                                                 const TestGrid& grid,
                                                 const std::vector<int>* oracle) {
  std::vector<fs::path> out;
  const auto label = policy_label(table.policy);
  const std::size_t per_gap = grid.ramp_lengths.size() * grid.start_differentials.size();
  for (std::size_t g = 0; g < grid.gaps.size(); ++g) {
    CollisionTable slice{table.policy, {}};
    std::vector<int> oracle_slice;
    for (std::size_t i = g * per_gap; i < (g + 1) * per_gap; ++i) {
      slice.cells.push_back(table.cells[i]);
      if (oracle) oracle_slice.push_back((*oracle)[i]);
    }
    const auto gap = num(grid.gaps[g]);
    const auto table_path = dir / ("table_" + gap + "_" + label + ".csv");
    const auto pivot_path = dir / ("pivot_" + gap + "_" + label + ".csv");
    std::ofstream t(table_path);
    write_table_csv(t, slice, oracle ? &oracle_slice : nullptr);
    std::ofstream p(pivot_path);
    write_pivot_csv(p, table, grid, grid.gaps[g]);
    if (!t || !p) throw std::runtime_error("cannot write tables under " + dir.string());
    out.push_back(table_path);
    out.push_back(pivot_path);
  }
  return out;
}

}  // namespace

std::optional<std::uint64_t> seed_from_environment() {
  const char* text = std::getenv("MERGE_ARENA_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  char* end = nullptr;
  const auto value = std::strtoull(text, &end, 10);
  if (end == text || *end != '\0') throw ConfigError(std::string("MERGE_ARENA_SEED is not an integer: ") + text);
  return value;
}

int cmd_train(const TrainOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TrainConfig base = build_train_config(opts);
    if (!opts.sweep_decay) {
      const auto m = run_training(base, opts.resume, &out);
      out << "trained " << m["episodes"].get<long long>() << " episodes, mean steps "
          << num(m["mean_steps"].get<double>()) << ", manifest " << (base.out_dir / "manifest.json").string()
          << '\n';
      return kExitOk;
    }

    const std::vector<double> decays{0.9995, 0.99995, 0.999995};
    std::vector<TrainConfig> runs;
    for (double d : decays) {
      TrainConfig cfg = base;
      cfg.hyper.noise_decay = d;
      cfg.out_dir = base.out_dir / ("decay_" + num(d));
      cfg.eval_jobs = 1;
      runs.push_back(cfg);
    }
    std::vector<json> manifests(runs.size());
    std::vector<std::exception_ptr> failures(runs.size());
    auto run_one = [&](std::size_t i) {
      try {
        manifests[i] = run_training(runs[i], opts.resume, nullptr);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    };
    const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, runs.size());
    for (std::size_t start = 0; start < runs.size(); start += jobs) {
      std::vector<std::jthread> pool;
      for (std::size_t i = start; i < std::min(start + jobs, runs.size()); ++i) pool.emplace_back(run_one, i);
    }
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
    json sweep;
    sweep["command"] = "train --sweep-decay";
    sweep["version"] = kVersion;
    sweep["seed"] = base.seed;
    json list = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      list.push_back({{"decay", decays[i]}, {"manifest", (runs[i].out_dir / "manifest.json").string()}});
      out << "decay " << num(decays[i]) << ": " << manifests[i]["episodes"].get<long long>()
          << " episodes in " << runs[i].out_dir.string() << '\n';
    }
    sweep["runs"] = list;
    write_json(base.out_dir / "manifest.json", sweep);
    return kExitOk;
  });
}

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(opts.merge_checkpoint, "merge checkpoint");
    require_file(opts.traffic_checkpoint, "traffic checkpoint");
    const auto merge_probe = load_checkpoint(opts.merge_checkpoint);
    const Variant variant = merge_probe.meta.variant;
    const auto merge = load_checkpoint(opts.merge_checkpoint,
                                       static_cast<int>(feature_count(merge_obs_variant(variant))));
    const auto traffic = load_checkpoint(opts.traffic_checkpoint,
                                         static_cast<int>(feature_count(traffic_obs_variant(variant))));
    if (traffic.meta.variant != variant) {
      throw ConfigError("checkpoint variants differ: merge is " + std::string(to_string(variant)) +
                        ", traffic is " + std::string(to_string(traffic.meta.variant)));
    }
    if (merge.meta.learner != "merge" || traffic.meta.learner != "traffic") {
      throw ConfigError("expected a merge checkpoint and a traffic checkpoint, got " +
                        merge.meta.learner + " and " + traffic.meta.learner);
    }

    TestGrid grid = TestGrid::defaults(variant);
    SimParams sim;
    if (opts.grid_config) apply_grid_config(ConfigFile::load(*opts.grid_config), grid, sim);
    if (opts.gaps) grid.gaps = *opts.gaps;
    if (opts.episodes_per_cell) grid.episodes_per_cell = *opts.episodes_per_cell;
    if (const auto env = seed_from_environment()) grid.seed = *env;
    if (opts.seed) grid.seed = *opts.seed;
    if (opts.policy != "mixture") grid.policies = {parse_traffic_policy(opts.policy)};
    grid.validate();

    fs::create_directories(opts.out_dir);
    const auto started = utc_now();
    const auto result =
        run_test_grid(merge.learner.actor, traffic.learner.actor, grid, variant, sim, opts.jobs);

    std::optional<std::vector<int>> oracle;
    int violations = 0;
    json violation_cells = json::array();
    if (opts.oracle) {
      if (variant != Variant::three_vehicle) {
        throw ConfigError("--oracle is available for the three-vehicle scene only");
      }
      oracle = oracle_grid(grid, sim, OracleSettings{}, opts.jobs);
      for (const auto& table : result.per_policy) {
        for (std::size_t i = 0; i < table.cells.size(); ++i) {
          if ((*oracle)[i] == 0 && table.cells[i].collisions == 0) {
            ++violations;
            const auto& c = table.cells[i];
            violation_cells.push_back({{"policy", policy_label(table.policy)},
                                       {"gap", c.gap},
                                       {"ramp_length", c.ramp_length},
                                       {"start_differential", c.start_differential}});
          }
        }
      }
    }

    std::vector<fs::path> artifacts;
    const std::vector<int>* overlay = oracle ? &*oracle : nullptr;
    for (const auto& table : result.per_policy) {
      const auto files = per_gap_files(opts.out_dir, table, grid, overlay);
      artifacts.insert(artifacts.end(), files.begin(), files.end());
    }
    if (opts.policy == "mixture") {
      const auto files = per_gap_files(opts.out_dir, result.mixture, grid, overlay);
      artifacts.insert(artifacts.end(), files.begin(), files.end());
    }

    const auto summary = summarize(result, merge.meta.episode);
    json s;
    s["variant"] = std::string(to_string(variant));
    s["checkpoint_episode"] = merge.meta.episode;
    s["total_collisions"] = result.total_collisions();
    s["total_episodes"] = result.total_episodes();
    s["decel_bias"] = summary.decel_bias;
    s["avg_accel"] = summary.avg_accel;
    s["avg_decel"] = summary.avg_decel;
    s["accel_count"] = result.actions.accel_count;
    s["decel_count"] = result.actions.decel_count;
    json per_policy = json::object();
    for (const auto& t : result.per_policy) per_policy[policy_label(t.policy)] = t.total_collisions();
    s["collisions_by_policy"] = per_policy;
    if (oracle) {
      s["oracle_unavoidable_cells"] = std::count(oracle->begin(), oracle->end(), 0);
      s["dominance_violations"] = violations;
      s["dominance_violation_cells"] = violation_cells;
    }
    const auto summary_path = opts.out_dir / "summary.json";
    write_json(summary_path, s);
    artifacts.push_back(summary_path);

    const auto manifest_path = opts.out_dir / "manifest.json";
    artifacts.push_back(manifest_path);
    json m;
    m["command"] = "evaluate";
    m["version"] = kVersion;
    m["seed"] = grid.seed;
    m["merge_checkpoint"] = opts.merge_checkpoint.string();
    m["traffic_checkpoint"] = opts.traffic_checkpoint.string();
    m["config_hash"] = merge.meta.config_hash;
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["artifacts"] = artifact_list(artifacts);
    write_json(manifest_path, m);

    out << "total collisions " << result.total_collisions() << " / " << result.total_episodes()
        << " episodes\n";
    if (oracle) {
      out << "dominance check: " << (violations == 0 ? "consistent" : "VIOLATED") << " ("
          << violations << " cells collision-free where the oracle says unavoidable)\n";
    }
    return kExitOk;
  });
}

int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    TestGrid grid = TestGrid::defaults(Variant::three_vehicle);
    SimParams sim;
    if (opts.grid_config) apply_grid_config(ConfigFile::load(*opts.grid_config), grid, sim);
    if (opts.gaps) grid.gaps = *opts.gaps;
    if (opts.ramps) grid.ramp_lengths = *opts.ramps;
    if (opts.differentials) grid.start_differentials = *opts.differentials;
    grid.validate();

    OracleMode mode;
    if (opts.mode == "cooperative") {
      mode = OracleMode::cooperative;
    } else if (opts.mode == "constant") {
      mode = OracleMode::constant_traffic;
    } else {
      throw ConfigError("unknown oracle mode '" + opts.mode + "' (expected cooperative or constant)");
    }
    OracleSettings settings = opts.fine ? OracleSettings::fine(mode) : OracleSettings{};
    settings.mode = mode;

    fs::create_directories(opts.out_dir);
    const auto started = utc_now();
    const auto verdicts = oracle_grid(grid, sim, settings, opts.jobs);

    std::vector<fs::path> artifacts;
    const auto long_path = opts.out_dir / "oracle.csv";
    {
      std::ofstream f(long_path);
      f << "gap,ramp_length,start_differential,avoidable\n";
      std::size_t i = 0;
      for (double g : grid.gaps) {
        for (double r : grid.ramp_lengths) {
          for (double d : grid.start_differentials) f << num(g) << ',' << num(r) << ',' << num(d) << ',' << verdicts[i++] << '\n';
        }
      }
      if (!f) throw std::runtime_error("cannot write " + long_path.string());
    }
    artifacts.push_back(long_path);
    std::size_t i = 0;
    for (double g : grid.gaps) {
      const auto path = opts.out_dir / ("oracle_" + num(g) + ".csv");
      std::ofstream f(path);
      f << "ramp_length";
      for (double d : grid.start_differentials) f << ',' << num(d);
      f << '\n';
      for (double r : grid.ramp_lengths) {
        f << num(r);
        for (std::size_t k = 0; k < grid.start_differentials.size(); ++k) f << ',' << verdicts[i++];
        f << '\n';
      }
      if (!f) throw std::runtime_error("cannot write " + path.string());
      artifacts.push_back(path);
    }

    const auto manifest_path = opts.out_dir / "manifest.json";
    artifacts.push_back(manifest_path);
    json m;
    m["command"] = "oracle";
    m["version"] = kVersion;
    m["mode"] = opts.mode;
    m["decision_interval"] = settings.decision_interval;
    m["levels"] = settings.levels;
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["artifacts"] = artifact_list(artifacts);
    write_json(manifest_path, m);

    const auto unavoidable = std::count(verdicts.begin(), verdicts.end(), 0);
    out << "oracle (" << opts.mode << (opts.fine ? ", fine" : "") << "): " << unavoidable << " of "
        << verdicts.size() << " cells unavoidable\n";
    return kExitOk;
  });
}

int cmd_select_best(const SelectBestOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.metric != "collisions") {
      throw ConfigError("unsupported metric '" + opts.metric + "' (only 'collisions' is available)");
    }
    if (!fs::is_directory(opts.summaries_dir)) {
      throw MissingInput("summary directory not found: " + opts.summaries_dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opts.summaries_dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<CheckpointSummary> summaries;
    for (const auto& f : files) {
      std::ifstream in(f);
      json j;
      try {
        in >> j;
        if (!j.contains("episode") || !j.contains("total_collisions")) continue;  // not a summary
        summaries.push_back({j.at("episode").get<long long>(), j.at("total_collisions").get<int>(),
                             j.value("decel_bias", 0.0), j.value("avg_accel", 0.0),
                             j.value("avg_decel", 0.0)});
      } catch (const json::exception& e) {
        throw ConfigError(f.string() + ": " + e.what());
      }
    }
    if (summaries.empty()) {
      throw ConfigError("no checkpoint summaries in " + opts.summaries_dir.string());
    }
    std::sort(summaries.begin(), summaries.end(),
              [](const auto& a, const auto& b) { return a.episode < b.episode; });
    const long long best = select_best(summaries);
    const auto& chosen = *std::find_if(summaries.begin(), summaries.end(),
                                       [&](const auto& s) { return s.episode == best; });
    out << "best_checkpoint " << best << '\n'
        << "total_collisions " << chosen.total_collisions << '\n'
        << "decel_bias " << num(chosen.decel_bias) << '\n'
        << "avg_accel " << num(chosen.avg_accel) << '\n'
        << "avg_decel " << num(chosen.avg_decel) << '\n'
        << "candidates " << summaries.size() << '\n';
    if (opts.plot_data) {
      std::ofstream f(*opts.plot_data);
      f << "episode,total_collisions,decel_bias,avg_accel,avg_decel,selected\n";
      for (const auto& s : summaries) {
        f << s.episode << ',' << s.total_collisions << ',' << num(s.decel_bias) << ','
          << num(s.avg_accel) << ',' << num(s.avg_decel) << ',' << (s.episode == best ? 1 : 0) << '\n';
      }
      if (!f) throw std::runtime_error("cannot write " + opts.plot_data->string());
    }
    return kExitOk;
  });
}

int cmd_export_curves(const ExportCurvesOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.every <= 0 || opts.window == 0) throw ConfigError("--every and --window must be positive");
    fs::path input = opts.input;
    if (fs::is_directory(input)) input /= "episode_rewards.csv";
    require_file(input, "episode log");
    std::ifstream in(input);
    std::string line;
    std::getline(in, line);
    if (line.rfind("episode,status,steps,merge_reward,traffic_reward", 0) != 0) {
      throw ConfigError(input.string() + ":1: not an episode reward log");
    }
    CurveLog merge_log("merge", opts.window);
    CurveLog traffic_log("traffic", opts.window);
    std::ofstream f(opts.output);
    write_curve_header(f);
    long long last = 0;
    int row = 1;
    auto flush = [&](long long ep) {
      for (auto* log : {&merge_log, &traffic_log}) {
        if (const auto p = log->flush(ep)) write_curve_row(f, *p, log->learner());
      }
    };
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, ',')) cols.push_back(col);
      if (line.back() == ',') cols.emplace_back();
      if (cols.size() != 5) throw ConfigError(input.string() + ":" + std::to_string(row) + ": expected 5 columns");
      try {
        last = std::stoll(cols[0]);
        merge_log.add(std::stod(cols[3]));
        if (!cols[4].empty()) traffic_log.add(std::stod(cols[4]));
      } catch (const std::logic_error&) {
        throw ConfigError(input.string() + ":" + std::to_string(row) + ": malformed number");
      }
      if (last % opts.every == 0) flush(last);
    }
    if (last % opts.every != 0) flush(last);
    if (!f) throw std::runtime_error("cannot write " + opts.output.string());
    out << "wrote " << opts.output.string() << '\n';
    return kExitOk;
  });
}

}  // namespace merge_arena
