#pragma once

#include <optional>
#include <random>
#include <vector>

#include "merge_arena/mlp.hpp"
#include "merge_arena/observation.hpp"
#include "merge_arena/scene.hpp"

namespace merge_arena {

inline constexpr double kMinTiv = 0.8;         // s, constant-policy braking threshold
inline constexpr double kConstantBrake = -5.0;  // m/s^2

// Brakes at the limit while the raw TIV to the vehicle ahead is under kMinTiv, else holds speed.
double constant_policy(const Scene& s, VehicleId vehicle);

double random_policy(std::mt19937_64& rng, const SimParams& params = {});

// Deterministic actor pass on the normalized observation. Throws
// std::invalid_argument when the observation and network dimensions differ.
double reactive_policy(const ObservationVec& obs, const Mlp& actor);

// `test_policy` empty: each vehicle draws uniformly from {constant, random, reactive}.
// Otherwise every vehicle gets `test_policy`.
std::vector<PolicyKind> sample_policy_assignment(std::mt19937_64& rng, std::size_t n_traffic,
                                                 std::optional<PolicyKind> test_policy = {});

}  // namespace merge_arena
