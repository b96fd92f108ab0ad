#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "merge_arena/ddpg.hpp"
#include "merge_arena/evaluation.hpp"
#include "merge_arena/reward.hpp"
#include "merge_arena/scene.hpp"

namespace merge_arena {

enum class Mode { train, eval };

// Learners are updated only in train mode; eval mode reads their actors.
struct Learners {
  DdpgLearner* merge = nullptr;
  DdpgLearner* traffic = nullptr;
};

struct Actors {
  const Mlp* merge = nullptr;
  const Mlp* traffic = nullptr;
};

struct EpisodeHooks {
  std::ostream* trace = nullptr;         // scene rows after every step
  std::ostream* observations = nullptr;  // ego observation rows
};

struct EpisodeOutcome {
  Status status = Status::running;
  int steps = 0;
  double merge_return = 0.0;                // ego trajectory sum
  std::optional<double> traffic_return;     // first reactive traffic vehicle, when one exists
  std::vector<double> ego_actions;          // applied accelerations
  int reactive_vehicles = 0;                // reactive traffic vehicles present at t = 0
  int traffic_vehicles = 0;                 // all traffic vehicles present at t = 0
  long long merge_updates = 0;
  long long traffic_updates = 0;
  Scene final_scene;
};

// Train mode explores, pushes one transition per learner-driven vehicle and
// runs one update per learner per step once its buffer holds a batch.
EpisodeOutcome run_episode(const SceneConfig& cfg, const SimParams& params,
                           const RewardSpec& reward, Learners learners, Mode mode,
                           const EpisodeHooks* hooks = nullptr);

// Eval-only convenience: deterministic actors, no exploration, no updates.
EpisodeOutcome run_episode(const SceneConfig& cfg, const SimParams& params,
                           const RewardSpec& reward, Actors actors,
                           const EpisodeHooks* hooks = nullptr);

struct CurvePoint {
  long long index = 0;  // episode number (or 1-based series position)
  double reward = 0.0;
  double cum_avg = 0.0;
  double moving_mean = 0.0;
};

inline constexpr std::size_t kMovingMeanWindow = 10;

// Cumulative average and trailing mean (window of `window` points, fewer at the head).
std::vector<CurvePoint> curve_stats(std::span<const double> series,
                                    std::size_t window = kMovingMeanWindow);

// Streams block means over fixed-size episode blocks, as written to curves.csv:
// reward = mean of the block, cum_avg = mean over every episode so far,
// moving_mean = mean of the last `window` block means.
class CurveLog {
 public:
  explicit CurveLog(std::string learner, std::size_t window = kMovingMeanWindow)
      : learner_(std::move(learner)), window_(window) {}
  void add(double reward);
  // Closes the current block; empty blocks produce nothing.
  std::optional<CurvePoint> flush(long long episode);
  const std::string& learner() const { return learner_; }
  double cum_avg() const { return count_ ? total_ / double(count_) : 0.0; }

 private:
  std::string learner_;
  std::size_t window_;
  double total_ = 0.0;
  long long count_ = 0;
  double block_total_ = 0.0;
  long long block_count_ = 0;
  std::vector<double> block_means_;
};

void write_curve_header(std::ostream& out);
void write_curve_row(std::ostream& out, const CurvePoint& point, std::string_view learner);

struct TrainConfig {
  Variant variant = Variant::three_vehicle;
  long long total_episodes = 2'500'000;
  long long checkpoint_every = 25'000;
  long long curve_log_every = 1'000;
  DdpgHyper hyper;
  TrainingRanges ranges;
  RewardSpec reward;
  SimParams sim;
  SceneConfig scene;  // non-randomized fields (lengths of merge vehicles, full-scene cap)
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "run";
  bool write_summaries = true;   // standard test at every checkpoint
  TestGrid summary_grid;
  bool write_episode_log = true;  // per-episode rewards for export-curves
  int eval_jobs = 1;              // threads for the checkpoint summaries

  static TrainConfig defaults(Variant variant);
  void validate() const;
};

struct CheckpointRecord {
  long long episode = 0;
  std::filesystem::path merge_path;
  std::filesystem::path traffic_path;
  std::optional<std::filesystem::path> summary_path;
};

struct TrainResult {
  std::vector<CheckpointRecord> checkpoints;
  std::vector<std::filesystem::path> artifacts;
  long long episodes = 0;
  long long total_steps = 0;
  long long merge_updates = 0;
  long long traffic_updates = 0;
  long long reactive_vehicle_episodes = 0;  // sum over episodes of reactive vehicles at t = 0
  long long traffic_vehicle_episodes = 0;
  double mean_steps() const { return episodes ? double(total_steps) / double(episodes) : 0.0; }
};

// CRC-32 of the rendered config, ignoring run length and logging switches.
std::uint32_t config_hash(const TrainConfig& cfg);

// Fully seeded; identical configs give identical checkpoints and curve logs.
TrainResult train(const TrainConfig& cfg, std::ostream* progress = nullptr);

// Resumes from the latest checkpoint pair in cfg.out_dir. The replay buffers restart empty.
TrainResult resume_training(const TrainConfig& cfg, std::ostream* progress = nullptr);

std::filesystem::path checkpoint_name(Variant variant, std::string_view learner, long long episode);

}  // namespace merge_arena
