#include "merge_arena/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace merge_arena {

void RewardSpec::validate() const {
  if (!(merge_success > 0.0 && -at_fault_collision > merge_success &&
        -no_fault_collision > -at_fault_collision)) {
    throw ConfigError(
        "reward magnitudes must satisfy |no_fault_collision| > |at_fault_collision| > "
        "merge_success > 0");
  }
  if (!(action_penalty_scale >= 0.0)) throw ConfigError("action_penalty_scale must be >= 0");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive");
}

double step_reward(double accel, const RewardSpec& spec) {
  return -std::abs(accel) * spec.action_penalty_scale * spec.reward_scale;
}

double terminal_reward(const Scene& scene, const VehicleState& vehicle, const RewardSpec& spec) {
  switch (scene.status) {
    case Status::running:
      throw std::logic_error("terminal_reward called on a running episode");
    case Status::timeout:
      return 0.0;
    case Status::success:
      return vehicle.lane == Lane::merge && vehicle.cleared_step
                 ? spec.merge_success * spec.reward_scale
                 : 0.0;
    case Status::collision:
      switch (scene.fault_of(vehicle.id)) {
        case Fault::at_fault:
          return spec.at_fault_collision * spec.reward_scale;
        case Fault::no_fault:
          return spec.no_fault_collision * spec.reward_scale;
        case Fault::none:
          return 0.0;
      }
  }
  return 0.0;
}

std::vector<double> terminal_rewards(const Scene& scene, const RewardSpec& spec) {
  std::vector<double> out;
  out.reserve(scene.vehicles.size());
  for (const auto& v : scene.vehicles) out.push_back(terminal_reward(scene, v, spec));
  return out;
}

}  // namespace merge_arena
