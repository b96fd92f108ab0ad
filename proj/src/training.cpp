#include "merge_arena/training.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "merge_arena/checkpoint.hpp"
#include "merge_arena/config.hpp"
#include "merge_arena/policy.hpp"
#include "merge_arena/seeding.hpp"

namespace merge_arena {

namespace {

struct Pending {
  VehicleId id;
  DdpgLearner* learner;
  std::array<double, kMaxFeatures> input;
  double action;
};

std::array<double, kMaxFeatures> network_input(const Scene& s, const VehicleState& v) {
  return observe(s, v).normalized();
}

EpisodeOutcome run_episode_impl(const SceneConfig& cfg, const SimParams& params,
                                const RewardSpec& reward, Actors actors, Learners learners,
                                Mode mode, const EpisodeHooks* hooks) {
  Scene s = init_episode(cfg, params);
  const auto merge_dim = static_cast<int>(feature_count(merge_obs_variant(cfg.variant)));
  const auto traffic_dim = static_cast<int>(feature_count(traffic_obs_variant(cfg.variant)));
  if (actors.merge == nullptr || actors.traffic == nullptr) {
    throw std::invalid_argument("run_episode needs both merge and traffic networks");
  }
  if (actors.merge->input_dim() != merge_dim || actors.traffic->input_dim() != traffic_dim) {
    throw std::invalid_argument("network input dimensions do not match the " +
                                std::string(to_string(cfg.variant)) + " observations");
  }
  const bool training = mode == Mode::train;

  EpisodeOutcome out;
  std::optional<VehicleId> representative;
  for (const auto& v : s.vehicles) {
    if (v.role == Role::traffic) ++out.traffic_vehicles;
    if (v.policy != PolicyKind::reactive) continue;
    ++out.reactive_vehicles;
    if (!representative) representative = v.id;
  }
  if (representative) out.traffic_return = 0.0;

  if (hooks && hooks->trace) write_trace_rows(*hooks->trace, s);

  std::vector<double> actions;
  std::vector<Pending> pending;
  while (!s.terminal()) {
    actions.assign(s.vehicles.size(), 0.0);
    pending.clear();
    bool merge_acted = false;
    bool traffic_acted = false;
    for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
      const auto& v = s.vehicles[i];
      double a = 0.0;
      switch (v.policy) {
        case PolicyKind::merge_network:
        case PolicyKind::reactive: {
          const bool merge = v.policy == PolicyKind::merge_network;
          const ObservationVec obs = observe(s, v);
          if (merge && hooks && hooks->observations && v.role == Role::ego) {
            write_observation_row(*hooks->observations, s.step, v.id, obs);
          }
          const auto input = obs.normalized();
          const Mlp& actor = merge ? *actors.merge : *actors.traffic;
          a = actor_forward(actor, std::span<const double>(input.data(), obs.size()));
          if (training) {
            DdpgLearner* learner = merge ? learners.merge : learners.traffic;
            a = explore(a, learner->noise_step, learner->hyper, learner->rng);
            pending.push_back({v.id, learner, input, a});
            (merge ? merge_acted : traffic_acted) = true;
          }
          break;
        }
        case PolicyKind::constant:
          a = constant_policy(s, v.id);
          break;
        case PolicyKind::random:
          a = random_policy(s.rng, params);
          break;
      }
      actions[i] = std::clamp(a, params.accel_min, params.accel_max);
      if (v.role == Role::ego) out.ego_actions.push_back(actions[i]);
    }
    if (merge_acted) ++learners.merge->noise_step;
    if (traffic_acted) ++learners.traffic->noise_step;

    std::vector<double> step_rewards;
    step_rewards.reserve(s.vehicles.size());
    std::vector<VehicleId> ids;
    for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
      step_rewards.push_back(step_reward(actions[i], reward));
      ids.push_back(s.vehicles[i].id);
    }

    merge_arena::advance(s, actions);
    if (hooks && hooks->trace) write_trace_rows(*hooks->trace, s);

    auto reward_of = [&](VehicleId id) {
      const auto it = std::find(ids.begin(), ids.end(), id);
      double r = step_rewards[static_cast<std::size_t>(it - ids.begin())];
      if (s.terminal()) {
        if (const auto* v = s.find(id)) r += terminal_reward(s, *v, reward);
      }
      return r;
    };
    out.merge_return += reward_of(s.ego().id);
    if (representative && s.find(*representative)) {
      *out.traffic_return += reward_of(*representative);
    }

    if (!training) continue;
    for (const auto& p : pending) {
      const auto* v = s.find(p.id);
      if (v == nullptr) continue;  // despawned by regeneration; no successor state
      Transition tr;
      tr.obs = p.input;
      tr.action = p.action;
      tr.reward = reward_of(p.id);
      tr.done = s.terminal();
      if (!tr.done) tr.next_obs = network_input(s, *v);
      p.learner->buffer.push(tr);
    }
    if (merge_acted && learners.merge->ready()) {
      learners.merge->update_from_buffer();
      ++out.merge_updates;
    }
    if (traffic_acted && learners.traffic->ready()) {
      learners.traffic->update_from_buffer();
      ++out.traffic_updates;
    }
  }
  out.status = s.status;
  out.steps = s.step;
  out.final_scene = std::move(s);
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

// Round-trip precision, so curves rebuilt from the log match the live ones.
std::string exact(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

void write_summary(const std::filesystem::path& path, const GridResult& grid, long long episode) {
  const auto summary = summarize(grid, episode);
  nlohmann::json j;
  j["episode"] = episode;
  j["variant"] = std::string(to_string(grid.variant));
  j["total_collisions"] = summary.total_collisions;
  j["total_episodes"] = grid.total_episodes();
  j["decel_bias"] = summary.decel_bias;
  j["avg_accel"] = summary.avg_accel;
  j["avg_decel"] = summary.avg_decel;
  j["accel_count"] = grid.actions.accel_count;
  j["decel_count"] = grid.actions.decel_count;
  nlohmann::json per_policy = nlohmann::json::object();
  for (const auto& table : grid.per_policy) {
    per_policy[policy_label(table.policy)] = table.total_collisions();
  }
  j["collisions_by_policy"] = per_policy;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write summary " + path.string());
}

TrainResult train_loop(const TrainConfig& cfg, DdpgLearner merge, DdpgLearner traffic,
                       long long first_episode, std::ostream* progress) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(cfg.out_dir / "checkpoints");
  if (cfg.write_summaries) fs::create_directories(cfg.out_dir / "summaries");

  TrainResult result;
  const auto hash = config_hash(cfg);

  const auto open_mode = first_episode == 0 ? std::ios::trunc : std::ios::app;
  const auto curve_path = cfg.out_dir / "curves.csv";
  std::ofstream curves(curve_path, std::ios::out | open_mode);
  if (first_episode == 0) write_curve_header(curves);
  result.artifacts.push_back(curve_path);
  std::ofstream episode_log;
  if (cfg.write_episode_log) {
    const auto path = cfg.out_dir / "episode_rewards.csv";
    episode_log.open(path, std::ios::out | open_mode);
    if (first_episode == 0) episode_log << "episode,status,steps,merge_reward,traffic_reward\n";
    result.artifacts.push_back(path);
  }
  if (!curves || (cfg.write_episode_log && !episode_log)) {
    throw std::runtime_error("cannot write training logs under " + cfg.out_dir.string());
  }

  auto checkpoint = [&](long long ep) {
    CheckpointRecord rec;
    rec.episode = ep;
    rec.merge_path = cfg.out_dir / "checkpoints" / checkpoint_name(cfg.variant, "merge", ep);
    rec.traffic_path = cfg.out_dir / "checkpoints" / checkpoint_name(cfg.variant, "traffic", ep);
    save_checkpoint(rec.merge_path, merge, {kCheckpointVersion, cfg.variant, "merge", ep, hash, cfg.seed});
    save_checkpoint(rec.traffic_path, traffic,
                    {kCheckpointVersion, cfg.variant, "traffic", ep, hash, cfg.seed});
    result.artifacts.push_back(rec.merge_path);
    result.artifacts.push_back(rec.traffic_path);
    if (cfg.write_summaries) {
      const auto grid = run_test_grid(merge.actor, traffic.actor, cfg.summary_grid, cfg.variant, cfg.sim,
                                        cfg.eval_jobs);
      std::ostringstream name;
      name << "summary_" << to_string(cfg.variant) << '_' << ep << ".json";
      rec.summary_path = cfg.out_dir / "summaries" / name.str();
      write_summary(*rec.summary_path, grid, ep);
      result.artifacts.push_back(*rec.summary_path);
      if (progress) {
        *progress << "checkpoint " << ep << " standard-test collisions "
                  << grid.total_collisions() << '/' << grid.total_episodes() << std::endl;
      }
    }
    result.checkpoints.push_back(rec);
  };

  CurveLog merge_curve("merge");
  CurveLog traffic_curve("traffic");
  for (long long ep = first_episode + 1; ep <= cfg.total_episodes; ++ep) {
    // Per-episode stream, so a resumed run draws the same scenarios as an uninterrupted one.
    std::mt19937_64 rng(derive_seed(cfg.seed ^ 0x5ce7e5eedULL, static_cast<std::uint64_t>(ep)));
    const SceneConfig scene_cfg = sample_training_config(cfg.scene, cfg.ranges, rng);
    const auto outcome =
        run_episode(scene_cfg, cfg.sim, cfg.reward, Learners{&merge, &traffic}, Mode::train);
    ++result.episodes;
    result.total_steps += outcome.steps;
    result.merge_updates += outcome.merge_updates;
    result.traffic_updates += outcome.traffic_updates;
    result.reactive_vehicle_episodes += outcome.reactive_vehicles;
    result.traffic_vehicle_episodes += outcome.traffic_vehicles;

    merge_curve.add(outcome.merge_return);
    if (outcome.traffic_return) traffic_curve.add(*outcome.traffic_return);
    if (cfg.write_episode_log) {
      episode_log << ep << ',' << to_string(outcome.status) << ',' << outcome.steps << ','
                  << exact(outcome.merge_return) << ','
                  << (outcome.traffic_return ? exact(*outcome.traffic_return) : std::string()) << '\n';
    }
    if (ep % cfg.curve_log_every == 0) {
      for (auto* log : {&merge_curve, &traffic_curve}) {
        if (const auto point = log->flush(ep)) write_curve_row(curves, *point, log->learner());
      }
      curves.flush();
      if (progress) {
        *progress << "episode " << ep << " cum_avg " << fmt(merge_curve.cum_avg())
                  << " mean_steps " << fmt(result.mean_steps()) << std::endl;
      }
    }
    if (ep % cfg.checkpoint_every == 0) checkpoint(ep);
  }
  if (cfg.total_episodes % cfg.curve_log_every != 0) {
    for (auto* log : {&merge_curve, &traffic_curve}) {
      if (const auto point = log->flush(cfg.total_episodes)) write_curve_row(curves, *point, log->learner());
    }
  }
  if (cfg.total_episodes > first_episode && cfg.total_episodes % cfg.checkpoint_every != 0) {
    checkpoint(cfg.total_episodes);
  }
  if (!curves || (cfg.write_episode_log && !episode_log)) {
    throw std::runtime_error("write failure in training logs under " + cfg.out_dir.string());
  }
  return result;
}

}  // namespace

EpisodeOutcome run_episode(const SceneConfig& cfg, const SimParams& params,
                           const RewardSpec& reward, Learners learners, Mode mode,
                           const EpisodeHooks* hooks) {
  if (learners.merge == nullptr || learners.traffic == nullptr) {
    throw std::invalid_argument("run_episode needs both learners");
  }
  return run_episode_impl(cfg, params, reward, Actors{&learners.merge->actor, &learners.traffic->actor},
                          learners, mode, hooks);
}

EpisodeOutcome run_episode(const SceneConfig& cfg, const SimParams& params,
                           const RewardSpec& reward, Actors actors, const EpisodeHooks* hooks) {
  return run_episode_impl(cfg, params, reward, actors, Learners{}, Mode::eval, hooks);
}

void CurveLog::add(double reward) {
  total_ += reward;
  ++count_;
  block_total_ += reward;
  ++block_count_;
}

std::optional<CurvePoint> CurveLog::flush(long long episode) {
  if (block_count_ == 0) return std::nullopt;
  block_means_.push_back(block_total_ / double(block_count_));
  const std::size_t n = std::min(block_means_.size(), window_);
  double recent = 0.0;
  for (std::size_t i = block_means_.size() - n; i < block_means_.size(); ++i) recent += block_means_[i];
  block_total_ = 0.0;
  block_count_ = 0;
  return CurvePoint{episode, block_means_.back(), cum_avg(), recent / double(n)};
}

void write_curve_header(std::ostream& out) { out << "episode,reward,cum_avg,moving_mean,learner\n"; }

void write_curve_row(std::ostream& out, const CurvePoint& p, std::string_view learner) {
  out << p.index << ',' << fmt(p.reward) << ',' << fmt(p.cum_avg) << ',' << fmt(p.moving_mean) << ','
      << learner << '\n';
}

std::vector<CurvePoint> curve_stats(std::span<const double> series, std::size_t window) {
  if (window == 0) throw std::invalid_argument("curve_stats window must be positive");
  std::vector<CurvePoint> out;
  out.reserve(series.size());
  double total = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    total += series[i];
    const std::size_t n = std::min(i + 1, window);
    double recent = 0.0;
    for (std::size_t k = i + 1 - n; k <= i; ++k) recent += series[k];
    out.push_back({static_cast<long long>(i + 1), series[i], total / double(i + 1), recent / double(n)});
  }
  return out;
}

TrainConfig TrainConfig::defaults(Variant variant) {
  TrainConfig cfg;
  cfg.variant = variant;
  cfg.scene.variant = variant;
  cfg.total_episodes = variant == Variant::three_vehicle ? 2'500'000 : 10'000'000;
  cfg.summary_grid = TestGrid::defaults(variant);
  return cfg;
}

void TrainConfig::validate() const {
  if (total_episodes <= 0) throw ConfigError("train.episodes must be positive");
  if (checkpoint_every <= 0 || curve_log_every <= 0) {
    throw ConfigError("train.checkpoint_every and train.curve_log_every must be positive");
  }
  if (checkpoint_every % curve_log_every != 0) {
    throw ConfigError("train.checkpoint_every must be a multiple of train.curve_log_every");
  }
  if (scene.variant != variant) throw ConfigError("scene.variant disagrees with train variant");
  auto ordered = [](const std::pair<double, double>& r, double floor, bool open, const char* name) {
    const bool low_ok = open ? r.first > floor : r.first >= floor;
    if (!low_ok || r.first > r.second) {
      throw ConfigError(std::string("ranges.") + name + " must be ordered and " +
                        (open ? "above " : "at least ") + std::to_string(floor));
    }
  };
  ordered(ranges.ramp_length, 0.0, true, "ramp_length");
  ordered(ranges.start_differential, -1e9, false, "start_differential");
  ordered(ranges.initial_speed, 0.0, true, "initial_speed");
  ordered(ranges.traffic_length, 0.0, true, "traffic_length");
  ordered(ranges.tiv, 0.0, true, "tiv");
  ordered(ranges.lead_merge_offset, 0.0, true, "lead_merge_offset");
  hyper.validate();
  reward.validate();
  sim.validate(ranges.ramp_length.second, ranges.initial_speed.first);
  scene.validate();
  if (write_summaries) summary_grid.validate();
}

std::uint32_t config_hash(const TrainConfig& cfg) {
  // Run length and logging switches do not change what is learned, so a run
  // can be extended or resumed quietly.
  TrainConfig learning = cfg;
  learning.total_episodes = 0;
  learning.write_summaries = false;
  learning.write_episode_log = false;
  const std::string text = render_config(learning);
  return crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::filesystem::path checkpoint_name(Variant variant, std::string_view learner, long long episode) {
  std::ostringstream os;
  os << to_string(variant) << '_' << learner << '_' << episode << ".ckpt";
  return os.str();
}

TrainResult train(const TrainConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const auto merge_dim = static_cast<int>(feature_count(merge_obs_variant(cfg.variant)));
  const auto traffic_dim = static_cast<int>(feature_count(traffic_obs_variant(cfg.variant)));
  DdpgLearner merge(merge_dim, cfg.hyper, derive_seed(cfg.seed, 1));
  DdpgLearner traffic(traffic_dim, cfg.hyper, derive_seed(cfg.seed, 2));
  return train_loop(cfg, std::move(merge), std::move(traffic), 0, progress);
}

TrainResult resume_training(const TrainConfig& cfg, std::ostream* progress) {
  namespace fs = std::filesystem;
  const auto dir = cfg.out_dir / "checkpoints";
  long long latest = -1;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      const std::string prefix = std::string(to_string(cfg.variant)) + "_merge_";
      if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".ckpt") continue;
      const long long ep = std::stoll(name.substr(prefix.size()));
      if (fs::exists(dir / checkpoint_name(cfg.variant, "traffic", ep))) latest = std::max(latest, ep);
    }
  }
  if (latest < 0) throw std::runtime_error("no checkpoint pair to resume from in " + dir.string());
  const auto merge_dim = static_cast<int>(feature_count(merge_obs_variant(cfg.variant)));
  const auto traffic_dim = static_cast<int>(feature_count(traffic_obs_variant(cfg.variant)));
  auto merge = load_checkpoint(dir / checkpoint_name(cfg.variant, "merge", latest), merge_dim);
  auto traffic = load_checkpoint(dir / checkpoint_name(cfg.variant, "traffic", latest), traffic_dim);
  if (merge.meta.config_hash != config_hash(cfg)) {
    throw ConfigError("checkpoint config hash does not match the resume configuration");
  }
  return train_loop(cfg, std::move(merge.learner), std::move(traffic.learner), latest, progress);
}

}  // namespace merge_arena
