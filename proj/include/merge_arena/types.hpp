#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace merge_arena {

using VehicleId = std::uint32_t;

enum class Lane : std::uint8_t { merge, traffic };
enum class Role : std::uint8_t { ego, front_merge, traffic };
enum class Variant : std::uint8_t { three_vehicle, full_scene };
enum class Status : std::uint8_t { running, success, collision, timeout };
enum class Fault : std::uint8_t { none, at_fault, no_fault };

// Merge-lane vehicles are always driven by the shared merge network; traffic
// vehicles draw one of the other three kinds per episode.
enum class PolicyKind : std::uint8_t { merge_network, constant, random, reactive };

// Thrown on malformed user input (config values, CLI strings, dimensions).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view to_string(Lane lane);
std::string_view to_string(Role role);
std::string_view to_string(Variant variant);
std::string_view to_string(Status status);
std::string_view to_string(Fault fault);
std::string_view to_string(PolicyKind kind);

Variant parse_variant(std::string_view text);
PolicyKind parse_traffic_policy(std::string_view text);

}  // namespace merge_arena
