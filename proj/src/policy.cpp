#include "merge_arena/policy.hpp"

#include <stdexcept>
#include <string>

#include "merge_arena/ddpg.hpp"

namespace merge_arena {

double constant_policy(const Scene& s, VehicleId vehicle) {
  const VehicleState& v = s.at(vehicle);
  if (v.role != Role::traffic) {
    throw std::invalid_argument("constant_policy: vehicle " + std::to_string(vehicle) +
                                " is not a traffic vehicle");
  }
  return raw_tiv_to_front(s, v) < kMinTiv ? kConstantBrake : 0.0;
}

double random_policy(std::mt19937_64& rng, const SimParams& params) {
  return std::uniform_real_distribution<double>(params.accel_min, params.accel_max)(rng);
}

double reactive_policy(const ObservationVec& obs, const Mlp& actor) {
  if (static_cast<int>(obs.size()) != actor.input_dim()) {
    throw std::invalid_argument("reactive_policy: observation has " + std::to_string(obs.size()) +
                                " features, actor expects " + std::to_string(actor.input_dim()));
  }
  const auto x = obs.normalized();
  return actor_forward(actor, std::span<const double>(x.data(), obs.size()));
}

std::vector<PolicyKind> sample_policy_assignment(std::mt19937_64& rng, std::size_t n_traffic,
                                                 std::optional<PolicyKind> test_policy) {
  if (test_policy) return std::vector<PolicyKind>(n_traffic, *test_policy);
  static constexpr PolicyKind kChoices[] = {PolicyKind::constant, PolicyKind::random,
                                            PolicyKind::reactive};
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<PolicyKind> out;
  out.reserve(n_traffic);
  for (std::size_t i = 0; i < n_traffic; ++i) out.push_back(kChoices[pick(rng)]);
  return out;
}

}  // namespace merge_arena
