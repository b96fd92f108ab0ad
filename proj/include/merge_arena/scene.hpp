#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "merge_arena/types.hpp"

namespace merge_arena {

struct SimParams {
  double dt = 0.1;            // s
  double accel_min = -5.0;    // m/s^2
  double accel_max = 4.0;     // m/s^2
  double test_vehicle_length = 5.0;
  int max_steps = 600;
  double settle_window = 1.0;  // s of collision-free driving after the ego clears the goal

  // Throws ConfigError. The horizon must cover twice the slowest ramp traversal.
  void validate(double longest_ramp, double lowest_speed) const;
  int settle_steps() const;
};

struct VehicleState {
  VehicleId id = 0;
  Lane lane = Lane::traffic;
  Role role = Role::traffic;
  double pos = 0.0;  // front bumper, m
  double vel = 0.0;  // m/s, never negative
  double length = 5.0;
  PolicyKind policy = PolicyKind::constant;
  double prev_pos = 0.0;  // front bumper one step earlier
  double accel = 0.0;     // last applied (clipped) acceleration
  std::optional<int> cleared_step;  // merge vehicles: step at which the rear bumper passed the goal

  double rear() const { return pos - length; }
};

// Strict interval overlap of the two bodies; touching bumpers do not collide.
bool bodies_overlap(const VehicleState& a, const VehicleState& b);

struct SceneConfig {
  Variant variant = Variant::three_vehicle;
  double ramp_length = 150.0;        // ego front bumper to goal line at t = 0
  double start_differential = 0.0;   // reference traffic front minus ego front, m (positive: traffic ahead)
  std::optional<double> traffic_gap;  // bumper gap of the tracked pair; empty: stream_tiv * initial_speed
  double stream_tiv = 0.8;           // s, spacing of regenerated traffic
  double initial_speed = 30.0;
  double merge_length = 5.0;
  double traffic_length = 5.0;
  std::optional<std::pair<double, double>> traffic_length_range;  // per-vehicle U[lo, hi] when set
  int traffic_count = 4;             // full-scene stream cap; the three-vehicle scene always tracks two
  double lead_merge_offset = 15.0;   // full scene: bumper gap from ego front to lead merge rear
  std::optional<PolicyKind> traffic_policy;  // empty: each traffic vehicle draws independently
  bool regenerate = true;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct Collision {
  VehicleId a = 0;
  VehicleId b = 0;
  VehicleId at_fault = 0;

  VehicleId struck() const { return at_fault == a ? b : a; }
};

enum class EventKind : std::uint8_t { collision, spawn, despawn, merge_cleared, terminated };

struct Event {
  EventKind kind;
  VehicleId subject = 0;  // collision: at-fault vehicle
  VehicleId other = 0;    // collision: struck vehicle
};

struct Scene {
  SimParams params;
  SceneConfig cfg;
  std::vector<VehicleState> vehicles;  // index 0 is always the ego
  double goal = 0.0;
  int step = 0;
  double t = 0.0;
  Status status = Status::running;
  std::map<VehicleId, Fault> fault_ledger;
  VehicleId next_id = 0;
  std::mt19937_64 rng;

  const VehicleState& ego() const { return vehicles.front(); }
  const VehicleState* find(VehicleId id) const;
  const VehicleState& at(VehicleId id) const;  // throws std::out_of_range
  Fault fault_of(VehicleId id) const;
  bool merged(const VehicleState& v) const { return v.lane == Lane::merge && v.pos > goal; }
  bool terminal() const { return status != Status::running; }
};

struct StepResult {
  Scene scene;
  std::vector<Event> events;
};

VehicleState step_vehicle(const VehicleState& v, double accel, double dt, const SimParams& params);

// Throws ConfigError when the configuration is invalid or places two
// same-lane vehicles on top of each other.
Scene init_episode(const SceneConfig& cfg, const SimParams& params = {});

// `actions` is aligned with scene.vehicles. Stepping a terminal scene throws std::logic_error.
StepResult step_scene(const Scene& scene, std::span<const double> actions);
std::vector<Event> advance(Scene& scene, std::span<const double> actions);
// Second half of a step, after the vehicles have been moved: clock, collisions,
// clearing, termination and regeneration.
std::vector<Event> resolve_step(Scene& scene);

std::vector<Collision> detect_collisions(const Scene& scene);
std::vector<Collision> detect_collisions(std::span<const VehicleState> vehicles, double goal);

Scene regenerate_traffic(const Scene& scene);
void regenerate_traffic_in_place(Scene& scene, std::vector<Event>* events);

// Ranges used to randomize episodes during training.
struct TrainingRanges {
  std::pair<double, double> ramp_length{40.0, 260.0};
  std::pair<double, double> start_differential{-20.0, 20.0};
  std::pair<double, double> initial_speed{20.0, 35.0};
  std::pair<double, double> traffic_length{4.0, 20.0};
  std::pair<double, double> tiv{0.5, 2.5};
  std::pair<double, double> lead_merge_offset{5.0, 40.0};
};

SceneConfig sample_training_config(const SceneConfig& base, const TrainingRanges& ranges,
                                   std::mt19937_64& rng);

// CSV rows: step,vehicle_id,lane,pos,vel,accel,status
void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, const Scene& scene);

}  // namespace merge_arena
