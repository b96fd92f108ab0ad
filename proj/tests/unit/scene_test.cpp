#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "merge_arena/scene.hpp"

namespace ma = merge_arena;

namespace {

ma::SceneConfig three_vehicle(double ramp, double diff, double gap) {
  ma::SceneConfig cfg;
  cfg.variant = ma::Variant::three_vehicle;
  cfg.ramp_length = ramp;
  cfg.start_differential = diff;
  cfg.traffic_gap = gap;
  cfg.traffic_policy = ma::PolicyKind::constant;
  return cfg;
}

ma::VehicleState vehicle(ma::VehicleId id, ma::Lane lane, ma::Role role, double pos, double vel,
                         double length = 5.0) {
  ma::VehicleState v;
  v.id = id;
  v.lane = lane;
  v.role = role;
  v.pos = pos;
  v.prev_pos = pos;
  v.vel = vel;
  v.length = length;
  return v;
}

std::vector<double> zeros(const ma::Scene& s) { return std::vector<double>(s.vehicles.size(), 0.0); }

}  // namespace

TEST(StepVehicle, ConstantAccelerationUpdate) {
  ma::SimParams p;
  auto v = vehicle(0, ma::Lane::merge, ma::Role::ego, 0.0, 30.0);
  const auto out = ma::step_vehicle(v, 2.0, 0.1, p);
  EXPECT_NEAR(out.vel, 30.2, 1e-12);
  EXPECT_NEAR(out.pos, 3.01, 1e-12);
  EXPECT_DOUBLE_EQ(out.prev_pos, 0.0);
}

TEST(StepVehicle, ClipsRequestedAcceleration) {
  ma::SimParams p;
  auto v = vehicle(0, ma::Lane::merge, ma::Role::ego, 0.0, 30.0);
  const auto out = ma::step_vehicle(v, 10.0, 0.1, p);
  EXPECT_DOUBLE_EQ(out.accel, 4.0);
  EXPECT_NEAR(out.vel, 30.4, 1e-12);
  EXPECT_DOUBLE_EQ(ma::step_vehicle(v, -50.0, 0.1, p).accel, -5.0);
}

TEST(StepVehicle, StopsInsideTheStep) {
  ma::SimParams p;
  auto v = vehicle(0, ma::Lane::merge, ma::Role::ego, 10.0, 0.2);
  const auto out = ma::step_vehicle(v, -5.0, 0.1, p);
  EXPECT_DOUBLE_EQ(out.vel, 0.0);
  EXPECT_NEAR(out.pos - 10.0, 0.004, 1e-15);
  const auto again = ma::step_vehicle(out, -5.0, 0.1, p);
  EXPECT_DOUBLE_EQ(again.pos, out.pos);
  EXPECT_DOUBLE_EQ(again.vel, 0.0);
}

TEST(SimParams, HorizonMustCoverSlowRamps) {
  ma::SimParams p;
  EXPECT_NO_THROW(p.validate(260.0, 20.0));  // 26 s needed, 60 s available
  p.max_steps = 200;
  EXPECT_THROW(p.validate(260.0, 20.0), ma::ConfigError);
  ma::SimParams bad;
  bad.accel_min = 1.0;
  EXPECT_THROW(bad.validate(100.0, 20.0), ma::ConfigError);
  EXPECT_EQ(ma::SimParams{}.settle_steps(), 10);
}

TEST(InitEpisode, ThreeVehicleGeometry) {
  const auto s = ma::init_episode(three_vehicle(150.0, 0.0, 15.0));
  ASSERT_EQ(s.vehicles.size(), 3u);
  const auto& ego = s.vehicles[0];
  const auto& rear = s.vehicles[1];
  const auto& front = s.vehicles[2];
  EXPECT_EQ(ego.role, ma::Role::ego);
  EXPECT_EQ(ego.lane, ma::Lane::merge);
  EXPECT_DOUBLE_EQ(s.goal - ego.pos, 150.0);
  EXPECT_DOUBLE_EQ(rear.pos, ego.pos);           // abreast, front bumpers aligned
  EXPECT_DOUBLE_EQ(front.rear() - rear.pos, 15.0);  // bumper-to-bumper gap
  for (const auto& v : s.vehicles) EXPECT_DOUBLE_EQ(v.vel, 30.0);
}

TEST(InitEpisode, FullSceneHasTwoMergeVehicles) {
  ma::SceneConfig cfg = three_vehicle(150.0, 5.0, 20.0);
  cfg.variant = ma::Variant::full_scene;
  cfg.lead_merge_offset = 12.0;
  const auto s = ma::init_episode(cfg);
  int merge = 0;
  for (const auto& v : s.vehicles) merge += v.lane == ma::Lane::merge;
  EXPECT_EQ(merge, 2);
  EXPECT_DOUBLE_EQ(s.vehicles[1].rear() - s.vehicles[0].pos, 12.0);
  EXPECT_GE(s.vehicles.size(), 4u);
}

TEST(InitEpisode, RejectsOverlappingPlacements) {
  EXPECT_THROW(ma::init_episode(three_vehicle(150.0, 0.0, 0.0)), ma::ConfigError);
  EXPECT_THROW(ma::init_episode(three_vehicle(150.0, 0.0, -3.0)), ma::ConfigError);
  EXPECT_THROW(ma::init_episode(three_vehicle(0.0, 0.0, 10.0)), ma::ConfigError);
  ma::SceneConfig fs = three_vehicle(150.0, 0.0, 10.0);
  fs.variant = ma::Variant::full_scene;
  fs.lead_merge_offset = 0.0;
  EXPECT_THROW(ma::init_episode(fs), ma::ConfigError);
}

TEST(InitEpisode, SameSeedIsBitIdentical) {
  ma::SceneConfig cfg = three_vehicle(120.0, -7.0, 12.0);
  cfg.traffic_policy.reset();
  cfg.traffic_length_range = std::pair{4.0, 20.0};
  cfg.rng_seed = 99;
  const auto a = ma::init_episode(cfg);
  const auto b = ma::init_episode(cfg);
  ASSERT_EQ(a.vehicles.size(), b.vehicles.size());
  for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
    EXPECT_EQ(a.vehicles[i].pos, b.vehicles[i].pos);
    EXPECT_EQ(a.vehicles[i].length, b.vehicles[i].length);
    EXPECT_EQ(a.vehicles[i].policy, b.vehicles[i].policy);
  }
  EXPECT_TRUE(a.rng == b.rng);
}

TEST(StepScene, CleanMergeSucceedsAfterSettleWindow) {
  // The traffic pair sits 40 m and more ahead; the ego crosses into open road.
  auto cfg = three_vehicle(20.0, 60.0, 30.0);
  cfg.regenerate = false;
  auto s = ma::init_episode(cfg);
  int steps = 0;
  while (!s.terminal()) {
    ma::advance(s, zeros(s));
    ++steps;
  }
  EXPECT_EQ(s.status, ma::Status::success);
  ASSERT_TRUE(s.ego().cleared_step.has_value());
  EXPECT_EQ(s.step - *s.ego().cleared_step, s.params.settle_steps());
}

TEST(StepScene, TimesOutAtMaxSteps) {
  auto cfg = three_vehicle(250.0, 60.0, 30.0);
  cfg.initial_speed = 0.0;  // nobody moves
  ma::SimParams p;
  p.max_steps = 50;
  auto s = ma::init_episode(cfg, p);
  while (!s.terminal()) ma::advance(s, zeros(s));
  EXPECT_EQ(s.status, ma::Status::timeout);
  EXPECT_EQ(s.step, 50);
}

TEST(StepScene, TerminalSceneCannotBeStepped) {
  auto cfg = three_vehicle(250.0, 60.0, 30.0);
  cfg.initial_speed = 0.0;
  ma::SimParams p;
  p.max_steps = 1;
  auto s = ma::init_episode(cfg, p);
  ma::advance(s, zeros(s));
  ASSERT_TRUE(s.terminal());
  const auto before = s.vehicles.front().pos;
  EXPECT_THROW(ma::step_scene(s, zeros(s)), std::logic_error);
  EXPECT_EQ(s.vehicles.front().pos, before);
}

TEST(StepScene, RequiresOneActionPerVehicle) {
  auto s = ma::init_episode(three_vehicle(150.0, 0.0, 15.0));
  std::vector<double> short_actions(1, 0.0);
  EXPECT_THROW(ma::advance(s, short_actions), std::logic_error);
}

// Independent closed-form check of a rear-end collision between the two
// merge-lane vehicles: ego 2.2 m behind the lead vehicle, closing at 5 m/s.
TEST(StepScene, MergeLaneRearEndCollisionBlamesRearVehicle) {
  ma::SceneConfig cfg = three_vehicle(250.0, 80.0, 30.0);
  cfg.variant = ma::Variant::full_scene;
  cfg.lead_merge_offset = 2.2;
  auto s = ma::init_episode(cfg);
  s.vehicles[0].vel = 30.0;
  s.vehicles[1].vel = 25.0;

  // gap(t) = 2.2 - 5 t, first negative on the dt grid at t = 0.5 s.
  int expected = -1;
  for (int k = 1; k < 20 && expected < 0; ++k) {
    if (2.2 - 5.0 * (k * 0.1) < 0.0) expected = k;
  }
  ASSERT_EQ(expected, 5);

  std::vector<ma::Event> events;
  while (!s.terminal()) events = ma::advance(s, zeros(s));
  EXPECT_EQ(s.status, ma::Status::collision);
  EXPECT_EQ(s.step, expected);
  EXPECT_EQ(s.fault_of(s.vehicles[0].id), ma::Fault::at_fault);
  EXPECT_EQ(s.fault_of(s.vehicles[1].id), ma::Fault::no_fault);
}

TEST(DetectCollisions, InsertionIntoOccupiedIntervalIsMergeFault) {
  const double goal = 100.0;
  auto ego = vehicle(0, ma::Lane::merge, ma::Role::ego, 101.0, 30.0);
  ego.prev_pos = 98.0;
  const auto traffic = vehicle(1, ma::Lane::traffic, ma::Role::traffic, 103.0, 30.0);
  std::vector<ma::VehicleState> vs{ego, traffic};
  const auto c = ma::detect_collisions(vs, goal);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].at_fault, 0u);
  EXPECT_EQ(c[0].struck(), 1u);
}

TEST(DetectCollisions, LanesOnlyMeetPastTheGoal) {
  const double goal = 100.0;
  const auto ego = vehicle(0, ma::Lane::merge, ma::Role::ego, 60.0, 30.0);
  const auto traffic = vehicle(1, ma::Lane::traffic, ma::Role::traffic, 61.0, 30.0);
  std::vector<ma::VehicleState> vs{ego, traffic};
  EXPECT_TRUE(ma::detect_collisions(vs, goal).empty());
  // Exactly at the goal line is still the ramp.
  vs[0].pos = 100.0;
  vs[1].pos = 101.0;
  EXPECT_TRUE(ma::detect_collisions(vs, goal).empty());
}

TEST(DetectCollisions, TouchingBumpersDoNotCollide) {
  const auto a = vehicle(0, ma::Lane::traffic, ma::Role::traffic, 10.0, 30.0);
  const auto b = vehicle(1, ma::Lane::traffic, ma::Role::traffic, 15.0, 30.0);
  std::vector<ma::VehicleState> vs{a, b};
  EXPECT_TRUE(ma::detect_collisions(vs, 0.0).empty());
}

// Merged ego at 20 m/s; traffic 1 m behind at 30 m/s brakes at -5 m/s^2.
// gap(t) = 1 - 10 t + 2.5 t^2 first goes negative on the grid at t = 0.2 s.
TEST(DetectCollisions, LateBrakingTrafficStrikesMergedEgo) {
  ma::Scene s = ma::init_episode(three_vehicle(50.0, -100.0, 30.0));
  s.vehicles.resize(2);
  s.vehicles[0].pos = s.goal + 10.0;
  s.vehicles[0].prev_pos = s.vehicles[0].pos;
  s.vehicles[0].vel = 20.0;
  s.vehicles[0].cleared_step = 0;
  s.vehicles[1].pos = s.vehicles[0].rear() - 1.0;
  s.vehicles[1].prev_pos = s.vehicles[1].pos;
  s.vehicles[1].vel = 30.0;
  s.cfg.regenerate = false;

  int expected = -1;
  for (int k = 1; k < 20 && expected < 0; ++k) {
    const double t = k * 0.1;
    if (1.0 - 10.0 * t + 2.5 * t * t < 0.0) expected = k;
  }
  ASSERT_EQ(expected, 2);

  const std::vector<double> actions{0.0, -5.0};
  while (!s.terminal()) ma::advance(s, actions);
  EXPECT_EQ(s.status, ma::Status::collision);
  EXPECT_EQ(s.step, expected);
  EXPECT_EQ(s.fault_of(s.vehicles[1].id), ma::Fault::at_fault);
  EXPECT_EQ(s.fault_of(s.vehicles[0].id), ma::Fault::no_fault);
}

TEST(DetectCollisions, SymmetricInPairOrder) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0.0, 30.0);
  std::uniform_real_distribution<double> back(0.0, 3.0);
  for (int trial = 0; trial < 2000; ++trial) {
    auto a = vehicle(3, ma::Lane::merge, ma::Role::ego, pos(rng), 20.0);
    auto b = vehicle(7, trial % 2 ? ma::Lane::traffic : ma::Lane::merge, ma::Role::traffic,
                     pos(rng), 20.0);
    a.prev_pos = a.pos - back(rng);
    b.prev_pos = b.pos - back(rng);
    std::vector<ma::VehicleState> ab{a, b};
    std::vector<ma::VehicleState> ba{b, a};
    const auto x = ma::detect_collisions(ab, 10.0);
    const auto y = ma::detect_collisions(ba, 10.0);
    ASSERT_EQ(x.size(), y.size());
    if (!x.empty()) EXPECT_EQ(x[0].at_fault, y[0].at_fault);
  }
}

TEST(Regenerate, ThreeVehicleRefillsUpstreamAtStreamTiv) {
  // Both traffic vehicles ahead of the ego: the farthest goes, a new one
  // appears behind the remaining one at the stream TIV.
  auto cfg = three_vehicle(200.0, 10.0, 20.0);
  cfg.stream_tiv = 0.8;
  auto s = ma::init_episode(cfg);
  const auto rear = s.vehicles[1];
  const auto front = s.vehicles[2];
  std::vector<ma::Event> events;
  ma::regenerate_traffic_in_place(s, &events);
  ASSERT_EQ(s.vehicles.size(), 3u);
  EXPECT_EQ(s.find(front.id), nullptr);
  ASSERT_NE(s.find(rear.id), nullptr);
  const auto& fresh = s.vehicles.back();
  EXPECT_NEAR(fresh.pos, rear.rear() - 0.8 * rear.vel, 1e-12);
  EXPECT_DOUBLE_EQ(fresh.vel, rear.vel);
  EXPECT_LT(fresh.pos, s.ego().pos);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].kind, ma::EventKind::despawn);
  EXPECT_EQ(events[1].kind, ma::EventKind::spawn);
}

TEST(Regenerate, ThreeVehicleRefillsDownstreamWhenEgoIsAhead) {
  auto cfg = three_vehicle(200.0, -40.0, 10.0);
  auto s = ma::init_episode(cfg);
  const auto lead = s.vehicles[2];
  ma::regenerate_traffic_in_place(s, nullptr);
  int ahead = 0;
  int behind = 0;
  for (const auto& v : s.vehicles) {
    if (v.role != ma::Role::traffic) continue;
    (v.pos > s.ego().pos ? ahead : behind)++;
  }
  EXPECT_EQ(ahead, 1);
  EXPECT_EQ(behind, 1);
  ASSERT_NE(s.find(lead.id), nullptr);
}

TEST(Regenerate, StraddledPairIsLeftAlone) {
  auto s = ma::init_episode(three_vehicle(200.0, -2.0, 10.0));
  const auto before = s.vehicles;
  const auto after = ma::regenerate_traffic(s);
  ASSERT_EQ(after.vehicles.size(), before.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after.vehicles[i].id, before[i].id);
}

TEST(Regenerate, FullSceneSpawnsUpstreamUntilCap) {
  ma::SceneConfig cfg = three_vehicle(200.0, 10.0, 20.0);
  cfg.variant = ma::Variant::full_scene;
  cfg.traffic_count = 3;
  auto s = ma::init_episode(cfg);
  ma::regenerate_traffic_in_place(s, nullptr);
  int traffic = 0;
  for (const auto& v : s.vehicles) traffic += v.role == ma::Role::traffic;
  EXPECT_EQ(traffic, 3);
  // At the cap: nothing more, even though the ego still has no traffic behind
  // once the new vehicle is moved ahead of it.
  for (auto& v : s.vehicles) {
    if (v.role == ma::Role::traffic) v.pos = s.ego().pos + 50.0 + v.id * 10.0;
  }
  ma::regenerate_traffic_in_place(s, nullptr);
  traffic = 0;
  for (const auto& v : s.vehicles) traffic += v.role == ma::Role::traffic;
  EXPECT_EQ(traffic, 3);
}

TEST(Regenerate, TerminalSceneIsRejected) {
  auto s = ma::init_episode(three_vehicle(200.0, 10.0, 20.0));
  s.status = ma::Status::timeout;
  EXPECT_THROW(ma::regenerate_traffic(s), std::logic_error);
}

TEST(SceneProperties, VelocityNonNegativeAndPositionsMonotone) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> act(-8.0, 7.0);
  for (int episode = 0; episode < 200; ++episode) {
    ma::TrainingRanges ranges;
    ma::SceneConfig base;
    base.variant = episode % 2 ? ma::Variant::full_scene : ma::Variant::three_vehicle;
    auto s = ma::init_episode(ma::sample_training_config(base, ranges, rng));
    while (!s.terminal()) {
      std::vector<double> actions(s.vehicles.size());
      for (auto& a : actions) a = act(rng);
      const auto before = s.vehicles;
      ma::advance(s, actions);
      for (const auto& v : s.vehicles) {
        ASSERT_GE(v.vel, 0.0);
        for (const auto& b : before) {
          if (b.id == v.id) ASSERT_GE(v.pos, b.pos);
        }
      }
    }
  }
}

TEST(SceneProperties, ZeroActionsKeepGapsConstant) {
  auto cfg = three_vehicle(200.0, -3.0, 17.0);
  cfg.regenerate = false;
  auto s = ma::init_episode(cfg);
  const double gap0 = s.vehicles[2].rear() - s.vehicles[1].pos;
  const double ego_gap0 = s.vehicles[0].pos - s.vehicles[1].pos;
  for (int k = 0; k < 40; ++k) {
    ma::advance(s, zeros(s));
    EXPECT_NEAR(s.vehicles[2].rear() - s.vehicles[1].pos, gap0, 1e-9);
    EXPECT_NEAR(s.vehicles[0].pos - s.vehicles[1].pos, ego_gap0, 1e-9);
  }
}

TEST(SceneProperties, SeededEpisodesReproduce) {
  auto run = [] {
    std::mt19937_64 rng(3);
    ma::SceneConfig base;
    auto cfg = ma::sample_training_config(base, ma::TrainingRanges{}, rng);
    auto s = ma::init_episode(cfg);
    std::uniform_real_distribution<double> act(-5.0, 4.0);
    std::ostringstream trace;
    while (!s.terminal()) {
      std::vector<double> actions(s.vehicles.size());
      for (auto& a : actions) a = act(rng);
      ma::advance(s, actions);
      ma::write_trace_rows(trace, s);
    }
    return trace.str();
  };
  EXPECT_EQ(run(), run());
}

TEST(Trace, HeaderAndRows) {
  std::ostringstream out;
  ma::write_trace_header(out);
  const auto s = ma::init_episode(three_vehicle(150.0, 0.0, 15.0));
  ma::write_trace_rows(out, s);
  const auto text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,vehicle_id,lane,pos,vel,accel,status");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}
