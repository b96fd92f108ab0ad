#pragma once

#include <stdexcept>
#include <vector>

#include "merge_arena/evaluation.hpp"
#include "merge_arena/scene.hpp"

namespace merge_arena {

enum class OracleMode {
  cooperative,       // traffic also picks its plan to help the ego
  constant_traffic,  // traffic holds its speed
};

struct OracleSettings {
  OracleMode mode = OracleMode::cooperative;
  double decision_interval = 0.5;  // s; the ego may change its action only on this grid
  std::vector<double> levels{-5.0, 0.0, 4.0};
  long long node_budget = 4'000'000;  // per traffic plan

  // 0.25 s decisions over five levels, used to cross-check the default resolution.
  static OracleSettings fine(OracleMode mode = OracleMode::cooperative);
  void validate(const SimParams& sim) const;
};

class OracleOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleVerdict {
  bool avoidable = false;
  long long nodes = 0;
  std::vector<double> ego_plan;  // one level per decision interval, when avoidable
  double rear_traffic_accel = 0.0;
  double front_traffic_accel = 0.0;
};

// Exhaustive search for a collision-free merge of the three-vehicle scene.
//
// The ego plan is piecewise constant over `levels`; every branch is explored,
// with identical scene states merged. Traffic plans are constant over the
// same levels (all pairs in cooperative mode, zero in constant mode): for a
// fixed merge order a vehicle ahead of the ego is never worse off driving
// faster and one behind never worse off driving slower, so constant extreme
// plans cover the pointwise-best traffic behaviour. Vehicles regenerated
// during the search get the extreme that moves them away from the ego.
// Kinematics advance on the common divisor of the decision interval and dt;
// collisions, clearing and regeneration are resolved on the dt grid exactly as
// in a simulated episode. A plan counts only if the episode ends in success.
// Throws OracleOverflow when no plan succeeds and some traffic plan ran out of budget.
OracleVerdict ideal_oracle(const SceneConfig& cell, const SimParams& sim,
                           const OracleSettings& settings = {});

// Feasibility per cell (1 avoidable, 0 unavoidable), ordered like CollisionTable::cells.
std::vector<int> oracle_grid(const TestGrid& grid, const SimParams& sim,
                             const OracleSettings& settings = {}, int jobs = 1);

}  // namespace merge_arena
