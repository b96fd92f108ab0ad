#pragma once

#include <vector>

#include "merge_arena/scene.hpp"

namespace merge_arena {

struct RewardSpec {
  double merge_success = 1e3;
  double at_fault_collision = -1e5;
  double no_fault_collision = -1e6;
  double action_penalty_scale = 1.0;
  double reward_scale = 1.0;  // multiplies every reward; 1.0 keeps the raw magnitudes

  void validate() const;
};

// Penalty for the magnitude of an (already clipped) acceleration.
double step_reward(double accel, const RewardSpec& spec = {});

// Terminal reward of one vehicle. Throws std::logic_error for a running scene.
double terminal_reward(const Scene& scene, const VehicleState& vehicle, const RewardSpec& spec = {});

// Terminal reward for every vehicle, aligned with scene.vehicles.
std::vector<double> terminal_rewards(const Scene& scene, const RewardSpec& spec = {});

}  // namespace merge_arena
