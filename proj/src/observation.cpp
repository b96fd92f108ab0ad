#include "merge_arena/observation.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace merge_arena {

namespace {

constexpr FeatureSpec kGapRearNext{"gap_rear_next_lane", -2.5, 30.0, "m"};
constexpr FeatureSpec kSpeedRearNext{"closing_speed_rear_next_lane", -10.0, 10.0, "m/s"};
constexpr FeatureSpec kGapFrontNext{"gap_front_next_lane", -2.5, 30.0, "m"};
constexpr FeatureSpec kSpeedFrontNext{"closing_speed_front_next_lane", -10.0, 10.0, "m/s"};
constexpr FeatureSpec kGapGoal{"gap_to_goal", -160.0, 150.0, "m"};
constexpr FeatureSpec kVelGoal{"closing_velocity_to_goal", 0.0, 40.0, "m/s"};
constexpr FeatureSpec kTivFront{"tiv_front", 0.0, 2.5, "s"};
constexpr FeatureSpec kTimeGoal{"time_to_goal", 0.0, 3.0, "s"};
constexpr FeatureSpec kGapNext{"gap_next_lane", -2.5, 30.0, "m"};
constexpr FeatureSpec kSpeedNext{"closing_speed_next_lane", -10.0, 10.0, "m/s"};
constexpr FeatureSpec kProximity{"proximity_to_ego", -1.0, 1.0, "unitless", true};
constexpr FeatureSpec kProximityFront{"proximity_front_merge", -1.0, 1.0, "unitless", true};
constexpr FeatureSpec kProximityRear{"proximity_rear_merge", -1.0, 1.0, "unitless", true};

constexpr std::array kMerge3v{kGapRearNext, kSpeedRearNext, kGapFrontNext,
                              kSpeedFrontNext, kGapGoal, kVelGoal};
constexpr std::array kMergeFs{kGapRearNext,    kSpeedRearNext, kGapFrontNext, kSpeedFrontNext,
                              kGapGoal,        kVelGoal,       kTivFront};
constexpr std::array kTraffic3v{kGapNext, kSpeedNext, kTivFront, kTimeGoal, kProximity};
constexpr std::array kTrafficFs{kGapRearNext, kSpeedRearNext, kGapFrontNext, kSpeedFrontNext,
                                kTivFront,    kTimeGoal,      kProximityFront, kProximityRear};

struct Neighbor {
  double gap = kPhantomGap;
  double closing = kPhantomClosingSpeed;
};

Neighbor within_range(double gap, double closing) {
  if (gap > kPhantomGap) return {};
  return {gap, closing};
}

// Nearest vehicle matching `pred` behind (pos <= ref.pos) or ahead of `ref`.
template <typename Pred>
const VehicleState* nearest(const Scene& s, const VehicleState& ref, bool ahead, Pred pred) {
  const VehicleState* best = nullptr;
  for (const auto& v : s.vehicles) {
    if (v.id == ref.id || !pred(v)) continue;
    if (ahead != (v.pos > ref.pos)) continue;
    if (best == nullptr || (ahead ? v.pos < best->pos : v.pos > best->pos)) best = &v;
  }
  return best;
}

// Closing speed is positive while the gap shrinks.
Neighbor rear_neighbor(const VehicleState& self, const VehicleState* rear) {
  if (rear == nullptr) return {};
  return within_range(self.rear() - rear->pos, rear->vel - self.vel);
}

Neighbor front_neighbor(const VehicleState& self, const VehicleState* front) {
  if (front == nullptr) return {};
  return within_range(front->rear() - self.pos, self.vel - front->vel);
}

bool is_traffic(const VehicleState& v) { return v.role == Role::traffic; }
bool is_merge(const VehicleState& v) { return v.lane == Lane::merge; }

const VehicleState* front_merge_vehicle(const Scene& s) {
  for (const auto& v : s.vehicles) {
    if (v.role == Role::front_merge) return &v;
  }
  return nullptr;
}

void fill(ObservationVec& obs, std::initializer_list<double> raw) {
  const auto specs = feature_specs(obs.variant);
  std::size_t i = 0;
  for (double x : raw) {
    obs.values[i] = clip(x, specs[i]);
    ++i;
  }
}

}  // namespace

std::span<const FeatureSpec> feature_specs(ObsVariant variant) {
  switch (variant) {
    case ObsVariant::merge_3v:
      return kMerge3v;
    case ObsVariant::merge_fs:
      return kMergeFs;
    case ObsVariant::traffic_3v:
      return kTraffic3v;
    case ObsVariant::traffic_fs:
      return kTrafficFs;
  }
  return {};
}

std::size_t feature_count(ObsVariant variant) { return feature_specs(variant).size(); }

ObsVariant merge_obs_variant(Variant variant) {
  return variant == Variant::three_vehicle ? ObsVariant::merge_3v : ObsVariant::merge_fs;
}

ObsVariant traffic_obs_variant(Variant variant) {
  return variant == Variant::three_vehicle ? ObsVariant::traffic_3v : ObsVariant::traffic_fs;
}

std::array<double, kMaxFeatures> ObservationVec::normalized() const {
  std::array<double, kMaxFeatures> out{};
  const auto specs = feature_specs(variant);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double mid = 0.5 * (specs[i].lo + specs[i].hi);
    const double half = 0.5 * (specs[i].hi - specs[i].lo);
    out[i] = (values[i] - mid) / half;
  }
  return out;
}

double clip(double x, const FeatureSpec& spec) { return std::min(std::max(x, spec.lo), spec.hi); }

double tiv(double gap, double rear_vel) {
  if (!(rear_vel > 0.0)) return kTivFront.hi;
  return clip(gap / rear_vel, kTivFront);
}

double raw_tiv_to_front(const Scene& s, const VehicleState& v) {
  const auto* front = nearest(s, v, true, [&](const VehicleState& o) {
    return is_traffic(o) || s.merged(o);
  });
  double gap = front != nullptr ? front->rear() - v.pos : kPhantomGap;
  if (gap > kPhantomGap) gap = kPhantomGap;
  if (!(v.vel > 0.0)) return std::numeric_limits<double>::infinity();
  return gap / v.vel;
}

ObservationVec merge_observation(const Scene& s, VehicleId vehicle) {
  const VehicleState& m = s.at(vehicle);
  if (m.lane != Lane::merge) {
    throw std::invalid_argument("merge_observation: vehicle " + std::to_string(vehicle) +
                                " is not a merge-lane vehicle");
  }
  const Neighbor rear = rear_neighbor(m, nearest(s, m, false, is_traffic));
  const Neighbor front = front_neighbor(m, nearest(s, m, true, is_traffic));
  ObservationVec obs;
  obs.variant = merge_obs_variant(s.cfg.variant);
  if (obs.variant == ObsVariant::merge_3v) {
    fill(obs, {rear.gap, rear.closing, front.gap, front.closing, s.goal - m.pos, m.vel});
  } else {
    const auto* ahead = nearest(s, m, true, is_merge);
    double gap = ahead != nullptr ? ahead->rear() - m.pos : kPhantomGap;
    if (gap > kPhantomGap) gap = kPhantomGap;
    fill(obs, {rear.gap, rear.closing, front.gap, front.closing, s.goal - m.pos, m.vel,
               tiv(gap, m.vel)});
  }
  return obs;
}

ObservationVec traffic_observation(const Scene& s, VehicleId vehicle) {
  const VehicleState& t = s.at(vehicle);
  if (t.role != Role::traffic) {
    throw std::invalid_argument("traffic_observation: vehicle " + std::to_string(vehicle) +
                                " is not a traffic vehicle");
  }
  double tiv_front = std::min(raw_tiv_to_front(s, t), kTivFront.hi);
  const double time_goal = t.vel > 0.0 ? (s.goal - t.pos) / t.vel : kTimeGoal.hi;
  const VehicleState& ego = s.ego();

  ObservationVec obs;
  obs.variant = traffic_obs_variant(s.cfg.variant);
  if (obs.variant == ObsVariant::traffic_3v) {
    const bool ego_ahead = ego.pos > t.pos;
    const Neighbor next = ego_ahead ? front_neighbor(t, &ego) : rear_neighbor(t, &ego);
    fill(obs, {next.gap, next.closing, tiv_front, time_goal, ego_ahead ? -1.0 : 1.0});
  } else {
    const Neighbor rear = rear_neighbor(t, nearest(s, t, false, is_merge));
    const Neighbor front = front_neighbor(t, nearest(s, t, true, is_merge));
    const auto* lead = front_merge_vehicle(s);
    const double prox_front = lead != nullptr && t.pos <= lead->pos ? -1.0 : 1.0;
    const double prox_rear = t.pos > ego.pos ? 1.0 : -1.0;
    fill(obs, {rear.gap, rear.closing, front.gap, front.closing, tiv_front, time_goal, prox_front,
               prox_rear});
  }
  return obs;
}

ObservationVec observe(const Scene& s, const VehicleState& v) {
  return v.lane == Lane::merge ? merge_observation(s, v.id) : traffic_observation(s, v.id);
}

void write_observation_header(std::ostream& out, ObsVariant variant) {
  out << "step,vehicle_id";
  for (const auto& spec : feature_specs(variant)) out << ',' << spec.name;
  out << '\n';
}

void write_observation_row(std::ostream& out, int step, VehicleId id, const ObservationVec& obs) {
  out << step << ',' << id;
  for (double x : obs.view()) out << ',' << x;
  out << '\n';
}

}  // namespace merge_arena
