#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>

#include "merge_arena/scene.hpp"

namespace merge_arena {

struct FeatureSpec {
  std::string_view name;
  double lo;
  double hi;
  std::string_view units;
  bool binary = false;  // takes only the values lo and hi
};

enum class ObsVariant : std::uint8_t { merge_3v, merge_fs, traffic_3v, traffic_fs };

inline constexpr std::size_t kMaxFeatures = 8;

// Raw value used for a neighbor that does not exist (or lies beyond this range).
inline constexpr double kPhantomGap = 100.0;
inline constexpr double kPhantomClosingSpeed = 0.0;

std::span<const FeatureSpec> feature_specs(ObsVariant variant);
std::size_t feature_count(ObsVariant variant);
ObsVariant merge_obs_variant(Variant variant);
ObsVariant traffic_obs_variant(Variant variant);

struct ObservationVec {
  ObsVariant variant = ObsVariant::merge_3v;
  std::array<double, kMaxFeatures> values{};

  std::size_t size() const { return feature_count(variant); }
  std::span<const double> view() const { return {values.data(), size()}; }
  double operator[](std::size_t i) const { return values[i]; }

  // Each feature mapped affinely from its range onto [-1, 1] for network input.
  std::array<double, kMaxFeatures> normalized() const;
};

double clip(double x, const FeatureSpec& spec);

// Bumper gap divided by the rear vehicle's speed, clipped to the TIV range.
double tiv(double gap, double rear_vel);

// Raw TIV from a traffic-lane occupant to the vehicle ahead of it in that lane;
// a missing leader counts as a phantom at kPhantomGap. Infinite when stopped.
double raw_tiv_to_front(const Scene& s, const VehicleState& v);

ObservationVec merge_observation(const Scene& s, VehicleId vehicle);
ObservationVec traffic_observation(const Scene& s, VehicleId vehicle);
ObservationVec observe(const Scene& s, const VehicleState& v);

void write_observation_header(std::ostream& out, ObsVariant variant);
void write_observation_row(std::ostream& out, int step, VehicleId id, const ObservationVec& obs);

}  // namespace merge_arena
