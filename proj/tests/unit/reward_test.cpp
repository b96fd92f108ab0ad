#include <gtest/gtest.h>

#include "merge_arena/reward.hpp"

namespace ma = merge_arena;

namespace {

ma::Scene base_scene() {
  ma::SceneConfig cfg;
  cfg.ramp_length = 100.0;
  cfg.traffic_gap = 20.0;
  cfg.traffic_policy = ma::PolicyKind::constant;
  return ma::init_episode(cfg);
}

}  // namespace

TEST(StepReward, PenalizesMagnitude) {
  EXPECT_DOUBLE_EQ(ma::step_reward(2.0), -2.0);
  EXPECT_DOUBLE_EQ(ma::step_reward(-5.0), -5.0);
  EXPECT_DOUBLE_EQ(ma::step_reward(0.0), 0.0);
  ma::RewardSpec half;
  half.action_penalty_scale = 0.5;
  EXPECT_DOUBLE_EQ(ma::step_reward(-3.0, half), -1.5);
}

TEST(TerminalReward, RunningEpisodeThrows) {
  const auto s = base_scene();
  EXPECT_THROW(ma::terminal_reward(s, s.ego()), std::logic_error);
  EXPECT_THROW(ma::terminal_rewards(s), std::logic_error);
}

TEST(TerminalReward, SuccessPaysClearedMergeVehiclesOnly) {
  auto s = base_scene();
  s.status = ma::Status::success;
  s.vehicles[0].cleared_step = 30;
  const auto r = ma::terminal_rewards(s);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0], 1000.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  EXPECT_DOUBLE_EQ(r[2], 0.0);
}

TEST(TerminalReward, TimeoutPaysNothing) {
  auto s = base_scene();
  s.status = ma::Status::timeout;
  for (double r : ma::terminal_rewards(s)) EXPECT_DOUBLE_EQ(r, 0.0);
}

TEST(TerminalReward, CollisionByFault) {
  auto s = base_scene();
  s.status = ma::Status::collision;
  s.fault_ledger[s.vehicles[0].id] = ma::Fault::at_fault;
  s.fault_ledger[s.vehicles[2].id] = ma::Fault::no_fault;
  const auto r = ma::terminal_rewards(s);
  EXPECT_DOUBLE_EQ(r[0], -1e5);
  EXPECT_DOUBLE_EQ(r[1], 0.0);  // uninvolved
  EXPECT_DOUBLE_EQ(r[2], -1e6);
}

TEST(TerminalReward, ScaleIsEquivariant) {
  ma::RewardSpec scaled;
  scaled.reward_scale = 0.01;
  auto s = base_scene();
  s.status = ma::Status::collision;
  s.fault_ledger[s.vehicles[0].id] = ma::Fault::at_fault;
  s.fault_ledger[s.vehicles[1].id] = ma::Fault::no_fault;
  const auto raw = ma::terminal_rewards(s);
  const auto small = ma::terminal_rewards(s, scaled);
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(small[i], 0.01 * raw[i], 1e-9);
  for (double a : {-5.0, -1.25, 0.0, 3.5}) {
    EXPECT_NEAR(ma::step_reward(a, scaled), 0.01 * ma::step_reward(a), 1e-15);
  }
}

TEST(RewardSpec, MagnitudeOrderingIsEnforced) {
  EXPECT_NO_THROW(ma::RewardSpec{}.validate());
  ma::RewardSpec swapped;
  swapped.at_fault_collision = -1e6;
  swapped.no_fault_collision = -1e5;
  EXPECT_THROW(swapped.validate(), ma::ConfigError);
  ma::RewardSpec cheap;
  cheap.at_fault_collision = -500.0;
  EXPECT_THROW(cheap.validate(), ma::ConfigError);
  ma::RewardSpec zero_scale;
  zero_scale.reward_scale = 0.0;
  EXPECT_THROW(zero_scale.validate(), ma::ConfigError);
}
