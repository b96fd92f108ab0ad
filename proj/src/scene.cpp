#include "merge_arena/scene.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "merge_arena/policy.hpp"

namespace merge_arena {

namespace {

double uniform(std::mt19937_64& rng, std::pair<double, double> range) {
  return std::uniform_real_distribution<double>(range.first, range.second)(rng);
}

double draw_traffic_length(Scene& s) {
  if (s.cfg.traffic_length_range) return uniform(s.rng, *s.cfg.traffic_length_range);
  return s.cfg.traffic_length;
}

PolicyKind draw_traffic_policy(Scene& s) {
  return sample_policy_assignment(s.rng, 1, s.cfg.traffic_policy).front();
}

VehicleState make_vehicle(Scene& s, Lane lane, Role role, double pos, double vel, double length,
                          PolicyKind policy) {
  VehicleState v;
  v.id = s.next_id++;
  v.lane = lane;
  v.role = role;
  v.pos = pos;
  v.prev_pos = pos;
  v.vel = vel;
  v.length = length;
  v.policy = policy;
  return v;
}

// Vehicles physically occupying the traffic lane: traffic plus merge vehicles past the goal.
template <typename Pred>
const VehicleState* extreme_lane_occupant(const Scene& s, Pred better) {
  const VehicleState* best = nullptr;
  for (const auto& v : s.vehicles) {
    if (v.role != Role::traffic && !s.merged(v)) continue;
    if (best == nullptr || better(v, *best)) best = &v;
  }
  return best;
}

void spawn_upstream(Scene& s, std::vector<Event>* events) {
  const auto* ref = extreme_lane_occupant(
      s, [](const VehicleState& a, const VehicleState& b) { return a.pos < b.pos; });
  if (ref == nullptr) return;
  const double vel = ref->vel;
  const double pos = ref->rear() - s.cfg.stream_tiv * vel;
  const double length = draw_traffic_length(s);
  const PolicyKind policy = draw_traffic_policy(s);
  s.vehicles.push_back(make_vehicle(s, Lane::traffic, Role::traffic, pos, vel, length, policy));
  if (events) events->push_back({EventKind::spawn, s.vehicles.back().id, 0});
}

void spawn_downstream(Scene& s, std::vector<Event>* events) {
  const auto* ref = extreme_lane_occupant(
      s, [](const VehicleState& a, const VehicleState& b) { return a.pos > b.pos; });
  if (ref == nullptr) return;
  const double vel = ref->vel;
  const double length = draw_traffic_length(s);
  const double pos = ref->pos + s.cfg.stream_tiv * vel + length;
  const PolicyKind policy = draw_traffic_policy(s);
  s.vehicles.push_back(make_vehicle(s, Lane::traffic, Role::traffic, pos, vel, length, policy));
  if (events) events->push_back({EventKind::spawn, s.vehicles.back().id, 0});
}

void remove_vehicle(Scene& s, VehicleId id, std::vector<Event>* events) {
  std::erase_if(s.vehicles, [id](const VehicleState& v) { return v.id == id; });
  if (events) events->push_back({EventKind::despawn, id, 0});
}

void regenerate_three_vehicle(Scene& s, std::vector<Event>* events) {
  // A stream moving far away from the ego is walked one spawn at a time;
  // the cap only bounds pathological inputs.
  for (int guard = 0; guard < 64; ++guard) {
    const VehicleState& ego = s.ego();
    const VehicleState* nearest_ahead = nullptr;
    const VehicleState* farthest_ahead = nullptr;
    const VehicleState* farthest_behind = nullptr;
    int ahead = 0;
    int behind = 0;
    for (const auto& v : s.vehicles) {
      if (v.role != Role::traffic) continue;
      if (v.pos > ego.pos) {
        ++ahead;
        if (!farthest_ahead || v.pos > farthest_ahead->pos) farthest_ahead = &v;
        if (!nearest_ahead || v.pos < nearest_ahead->pos) nearest_ahead = &v;
      } else {
        ++behind;
        if (!farthest_behind || v.pos < farthest_behind->pos) farthest_behind = &v;
      }
    }
    if (behind == 0 && ahead >= 2) {
      remove_vehicle(s, farthest_ahead->id, events);
      spawn_upstream(s, events);
    } else if (ahead == 0 && behind >= 2) {
      remove_vehicle(s, farthest_behind->id, events);
      spawn_downstream(s, events);
    } else {
      return;
    }
  }
}

void regenerate_full_scene(Scene& s, std::vector<Event>* events) {
  int traffic = 0;
  bool any_behind = false;
  for (const auto& v : s.vehicles) {
    if (v.role != Role::traffic) continue;
    ++traffic;
    if (v.pos <= s.ego().pos) any_behind = true;
  }
  if (!any_behind && traffic < s.cfg.traffic_count) spawn_upstream(s, events);
}

}  // namespace

void SimParams::validate(double longest_ramp, double lowest_speed) const {
  if (!(dt > 0.0)) throw ConfigError("sim.dt must be positive");
  if (!(accel_min < 0.0 && accel_max > 0.0)) {
    throw ConfigError("sim acceleration bounds must satisfy accel_min < 0 < accel_max");
  }
  if (!(test_vehicle_length > 0.0)) throw ConfigError("sim.test_vehicle_length must be positive");
  if (max_steps <= 0) throw ConfigError("sim.max_steps must be positive");
  if (settle_window < 0.0) throw ConfigError("sim.settle_window must be non-negative");
  if (lowest_speed > 0.0 && max_steps * dt < 2.0 * longest_ramp / lowest_speed) {
    throw ConfigError("sim.max_steps * dt must cover twice the slowest ramp traversal (" +
                      std::to_string(2.0 * longest_ramp / lowest_speed) + " s)");
  }
}

int SimParams::settle_steps() const {
  return static_cast<int>(std::lround(settle_window / dt));
}

bool bodies_overlap(const VehicleState& a, const VehicleState& b) {
  return a.rear() < b.pos && b.rear() < a.pos;
}

void SceneConfig::validate() const {
  if (!(ramp_length > 0.0)) throw ConfigError("ramp_length must be positive");
  if (!(initial_speed >= 0.0)) throw ConfigError("initial_speed must be non-negative");
  if (!(merge_length > 0.0) || !(traffic_length > 0.0)) {
    throw ConfigError("vehicle lengths must be positive");
  }
  if (traffic_length_range &&
      !(traffic_length_range->first > 0.0 &&
        traffic_length_range->first <= traffic_length_range->second)) {
    throw ConfigError("traffic length range must be positive and ordered");
  }
  if (traffic_count < 2) throw ConfigError("traffic_count must be at least 2");
  if (!(stream_tiv >= 0.0)) throw ConfigError("stream_tiv must be non-negative");
  if (traffic_policy == PolicyKind::merge_network) {
    throw ConfigError("traffic vehicles cannot use the merge network policy");
  }
}

const VehicleState* Scene::find(VehicleId id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

const VehicleState& Scene::at(VehicleId id) const {
  const auto* v = find(id);
  if (v == nullptr) throw std::out_of_range("unknown vehicle id " + std::to_string(id));
  return *v;
}

Fault Scene::fault_of(VehicleId id) const {
  auto it = fault_ledger.find(id);
  return it == fault_ledger.end() ? Fault::none : it->second;
}

VehicleState step_vehicle(const VehicleState& v, double accel, double dt, const SimParams& params) {
  VehicleState out = v;
  const double a = std::clamp(accel, params.accel_min, params.accel_max);
  out.prev_pos = v.pos;
  out.accel = a;
  const double vel_end = v.vel + a * dt;
  if (vel_end < 0.0) {
    // Stops inside the step: only the stopping distance is covered.
    out.pos = v.pos + v.vel * v.vel / (2.0 * -a);
    out.vel = 0.0;
  } else {
    out.pos = v.pos + v.vel * dt + 0.5 * a * dt * dt;
    out.vel = vel_end;
  }
  return out;
}

Scene init_episode(const SceneConfig& cfg, const SimParams& params) {
  cfg.validate();
  Scene s;
  s.params = params;
  s.cfg = cfg;
  s.rng.seed(cfg.rng_seed);
  s.goal = cfg.ramp_length;

  s.vehicles.push_back(make_vehicle(s, Lane::merge, Role::ego, 0.0, cfg.initial_speed,
                                    cfg.merge_length, PolicyKind::merge_network));
  if (cfg.variant == Variant::full_scene) {
    if (!(cfg.lead_merge_offset > 0.0)) {
      throw ConfigError("lead merge vehicle overlaps the ego at t=0 (lead_merge_offset must be > 0)");
    }
    const double lead_pos = cfg.lead_merge_offset + cfg.merge_length;
    s.vehicles.push_back(make_vehicle(s, Lane::merge, Role::front_merge, lead_pos,
                                      cfg.initial_speed, cfg.merge_length,
                                      PolicyKind::merge_network));
  }

  const double gap = cfg.traffic_gap.value_or(cfg.stream_tiv * cfg.initial_speed);
  if (!(gap > 0.0)) {
    throw ConfigError("traffic vehicles overlap at t=0 (gap must be > 0)");
  }
  const auto policies = sample_policy_assignment(s.rng, 2, cfg.traffic_policy);
  const double rear_len = draw_traffic_length(s);
  const double front_len = draw_traffic_length(s);
  const double rear_pos = cfg.start_differential;
  s.vehicles.push_back(make_vehicle(s, Lane::traffic, Role::traffic, rear_pos, cfg.initial_speed,
                                    rear_len, policies[0]));
  s.vehicles.push_back(make_vehicle(s, Lane::traffic, Role::traffic, rear_pos + gap + front_len,
                                    cfg.initial_speed, front_len, policies[1]));
  return s;
}

std::vector<Collision> detect_collisions(std::span<const VehicleState> vehicles, double goal) {
  std::vector<Collision> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < vehicles.size(); ++j) {
      const auto& a = vehicles[i];
      const auto& b = vehicles[j];
      const VehicleState* merge = nullptr;
      if (a.lane != b.lane) {
        merge = a.lane == Lane::merge ? &a : &b;
        // Lanes only meet past the convergence point.
        if (merge->pos <= goal) continue;
      }
      if (!bodies_overlap(a, b)) continue;

      VehicleId fault = 0;
      const bool a_strikes = b.rear() < a.pos && a.pos <= b.pos;
      const bool b_strikes = a.rear() < b.pos && b.pos <= a.pos;
      if (merge != nullptr && merge->prev_pos <= goal) {
        fault = merge->id;  // inserted across the goal into an occupied interval
      } else if (a_strikes != b_strikes) {
        fault = a_strikes ? a.id : b.id;
      } else if (merge != nullptr) {
        fault = merge->id;
      } else if (a.prev_pos != b.prev_pos) {
        fault = a.prev_pos < b.prev_pos ? a.id : b.id;
      } else {
        fault = std::min(a.id, b.id);
      }
      out.push_back({a.id, b.id, fault});
    }
  }
  return out;
}

std::vector<Collision> detect_collisions(const Scene& scene) {
  return detect_collisions(scene.vehicles, scene.goal);
}

void regenerate_traffic_in_place(Scene& scene, std::vector<Event>* events) {
  if (scene.terminal()) throw std::logic_error("regenerate_traffic called on a terminal scene");
  if (scene.cfg.variant == Variant::three_vehicle) {
    regenerate_three_vehicle(scene, events);
  } else {
    regenerate_full_scene(scene, events);
  }
}

Scene regenerate_traffic(const Scene& scene) {
  Scene out = scene;
  regenerate_traffic_in_place(out, nullptr);
  return out;
}

std::vector<Event> advance(Scene& s, std::span<const double> actions) {
  if (s.terminal()) throw std::logic_error("step_scene called on a terminal scene");
  if (actions.size() != s.vehicles.size()) {
    throw std::logic_error("step_scene needs exactly one action per vehicle");
  }
  for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
    s.vehicles[i] = step_vehicle(s.vehicles[i], actions[i], s.params.dt, s.params);
  }
  return resolve_step(s);
}

std::vector<Event> resolve_step(Scene& s) {
  std::vector<Event> events;
  ++s.step;
  s.t = s.step * s.params.dt;

  const auto collisions = detect_collisions(s);
  if (!collisions.empty()) {
    for (const auto& c : collisions) {
      s.fault_ledger[c.at_fault] = Fault::at_fault;
      s.fault_ledger.try_emplace(c.struck(), Fault::no_fault);
      events.push_back({EventKind::collision, c.at_fault, c.struck()});
    }
    s.status = Status::collision;
    events.push_back({EventKind::terminated, 0, 0});
    return events;
  }

  for (auto& v : s.vehicles) {
    if (v.lane == Lane::merge && !v.cleared_step && v.rear() > s.goal) {
      v.cleared_step = s.step;
      events.push_back({EventKind::merge_cleared, v.id, 0});
    }
  }
  const auto& ego = s.ego();
  if (ego.cleared_step && s.step - *ego.cleared_step >= s.params.settle_steps()) {
    s.status = Status::success;
  } else if (s.step >= s.params.max_steps) {
    s.status = Status::timeout;
  }
  if (s.terminal()) {
    events.push_back({EventKind::terminated, 0, 0});
    return events;
  }
  if (s.cfg.regenerate) regenerate_traffic_in_place(s, &events);
  return events;
}

StepResult step_scene(const Scene& scene, std::span<const double> actions) {
  StepResult out{scene, {}};
  out.events = advance(out.scene, actions);
  return out;
}

SceneConfig sample_training_config(const SceneConfig& base, const TrainingRanges& ranges,
                                   std::mt19937_64& rng) {
  SceneConfig cfg = base;
  cfg.ramp_length = uniform(rng, ranges.ramp_length);
  cfg.start_differential = uniform(rng, ranges.start_differential);
  cfg.initial_speed = uniform(rng, ranges.initial_speed);
  cfg.stream_tiv = uniform(rng, ranges.tiv);
  cfg.traffic_gap.reset();
  cfg.traffic_length_range = ranges.traffic_length;
  cfg.lead_merge_offset = uniform(rng, ranges.lead_merge_offset);
  cfg.traffic_policy.reset();
  cfg.rng_seed = rng();
  return cfg;
}

void write_trace_header(std::ostream& out) {
  out << "step,vehicle_id,lane,pos,vel,accel,status\n";
}

void write_trace_rows(std::ostream& out, const Scene& scene) {
  for (const auto& v : scene.vehicles) {
    out << scene.step << ',' << v.id << ',' << to_string(v.lane) << ',' << v.pos << ',' << v.vel
        << ',' << v.accel << ',' << to_string(scene.status) << '\n';
  }
}

}  // namespace merge_arena
