#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "merge_arena/mlp.hpp"
#include "merge_arena/scene.hpp"

namespace merge_arena {

struct TestGrid {
  std::vector<double> ramp_lengths;
  std::vector<double> start_differentials;
  std::vector<double> gaps;
  std::vector<PolicyKind> policies{PolicyKind::constant, PolicyKind::random, PolicyKind::reactive};
  int episodes_per_cell = 34;
  double tiv_test = 0.8;
  double initial_speed = 30.0;
  std::uint64_t seed = 0;

  // Ramps 40..260 step 20, differentials -20..20 step 5; gaps {5,10,15,25,100}
  // for the three-vehicle scene and {5,15,25} for the full scene.
  static TestGrid defaults(Variant variant);
  void validate() const;
  std::size_t cell_count() const {
    return ramp_lengths.size() * start_differentials.size() * gaps.size();
  }
};

struct ActionSummary {
  double avg_accel = 0.0;  // mean magnitude of positive actions
  double avg_decel = 0.0;  // mean magnitude of negative actions
  long long accel_count = 0;
  long long decel_count = 0;
  long long total = 0;
  double bias = 0.0;  // (decel_count - accel_count) / total

  void merge(const ActionSummary& other);
};

// Throws std::invalid_argument on an empty sequence.
ActionSummary summarize_actions(std::span<const double> actions);

struct CellStats {
  double ramp_length = 0.0;
  double start_differential = 0.0;
  double gap = 0.0;
  std::optional<PolicyKind> policy;  // empty for the mixture table
  int episodes = 0;
  int collisions = 0;
  int successes = 0;
  int timeouts = 0;
  double collision_pct = 0.0;
  ActionSummary actions;
};

struct CollisionTable {
  std::optional<PolicyKind> policy;  // empty: unweighted mean of the per-policy tables
  std::vector<CellStats> cells;      // gap-major, then ramp, then differential

  int total_collisions() const;
  int total_episodes() const;
  const CellStats& cell(double gap, double ramp, double diff) const;
};

struct GridResult {
  Variant variant = Variant::three_vehicle;
  TestGrid grid;
  std::vector<CollisionTable> per_policy;
  CollisionTable mixture;
  ActionSummary actions;  // over every merge-network action of the run

  int total_collisions() const;  // summed over the per-policy tables
  int total_episodes() const;
};

// Eval-mode episodes for every (gap, ramp, differential, policy) cell. Cells
// are seeded from (grid.seed, cell index), so results do not depend on `jobs`.
GridResult run_test_grid(const Mlp& merge_actor, const Mlp& traffic_actor, const TestGrid& grid,
                         Variant variant, const SimParams& sim = {}, int jobs = 1);

SceneConfig test_scene_config(const TestGrid& grid, Variant variant, double ramp, double diff,
                              double gap, PolicyKind policy, const SimParams& sim);

struct CheckpointSummary {
  long long episode = 0;  // checkpoint id
  int total_collisions = 0;
  double decel_bias = 0.0;
  double avg_accel = 0.0;
  double avg_decel = 0.0;
};

// Fewest collisions, then strongest deceleration bias, then earliest checkpoint.
// Throws std::invalid_argument on an empty list.
long long select_best(std::span<const CheckpointSummary> summaries);

CheckpointSummary summarize(const GridResult& result, long long episode);

// One row per cell per table; `oracle` (aligned with cells) adds a feasibility column.
void write_table_csv(std::ostream& out, const CollisionTable& table,
                     const std::vector<int>* oracle = nullptr);
// Ramp rows by differential columns for a single gap, values are collision %.
void write_pivot_csv(std::ostream& out, const CollisionTable& table, const TestGrid& grid,
                     double gap);
std::string policy_label(const std::optional<PolicyKind>& policy);

}  // namespace merge_arena
