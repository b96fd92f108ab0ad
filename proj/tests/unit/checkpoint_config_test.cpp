#include <gtest/gtest.h>

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "merge_arena/checkpoint.hpp"
#include "merge_arena/config.hpp"

namespace ma = merge_arena;
namespace fs = std::filesystem;

namespace {

ma::DdpgLearner trained_learner(int dim, std::uint64_t seed) {
  ma::DdpgHyper h;
  h.batch = 4;
  ma::DdpgLearner l(dim, h, seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    ma::Transition t;
    for (int k = 0; k < dim; ++k) {
      t.obs[k] = u(rng);
      t.next_obs[k] = u(rng);
    }
    t.action = 4.0 * u(rng);
    t.reward = u(rng);
    l.buffer.push(t);
  }
  for (int i = 0; i < 5; ++i) l.update_from_buffer();
  l.noise_step = 12345;
  return l;
}

ma::CheckpointMeta meta(const char* learner, long long ep) {
  ma::CheckpointMeta m;
  m.learner = learner;
  m.episode = ep;
  m.config_hash = 0xdeadbeef;
  m.seed = 42;
  return m;
}

ma::ConfigFile parse(const std::string& text) {
  std::istringstream in(text);
  return ma::ConfigFile::parse(in, "test.ini");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const auto learner = trained_learner(6, 3);
  const auto bytes = ma::encode_checkpoint(learner, meta("merge", 25000));
  const auto back = ma::decode_checkpoint(bytes, 6);
  EXPECT_EQ(ma::encode_checkpoint(back.learner, back.meta), bytes);
  EXPECT_TRUE(back.learner.actor == learner.actor);
  EXPECT_TRUE(back.learner.target_critic == learner.target_critic);
  EXPECT_EQ(back.learner.noise_step, 12345);
  EXPECT_EQ(back.learner.update_count, 5);
  EXPECT_EQ(back.learner.buffer.size(), 0u);
  EXPECT_TRUE(back.learner.rng == learner.rng);
  EXPECT_EQ(back.meta.episode, 25000);
  EXPECT_EQ(back.meta.learner, "merge");
  EXPECT_EQ(back.meta.config_hash, 0xdeadbeefu);
  EXPECT_EQ(back.meta.seed, 42u);
}

TEST(Checkpoint, RestoredLearnerContinuesIdentically) {
  auto a = trained_learner(5, 8);
  auto b = ma::decode_checkpoint(ma::encode_checkpoint(a, meta("traffic", 1))).learner;
  // Same buffer contents on both sides, then identical updates.
  for (std::size_t i = 0; i < a.buffer.size(); ++i) b.buffer.push(a.buffer[i]);
  for (int k = 0; k < 3; ++k) {
    a.update_from_buffer();
    b.update_from_buffer();
  }
  EXPECT_EQ(a.actor.flatten(), b.actor.flatten());
  EXPECT_EQ(a.critic.flatten(), b.critic.flatten());
}

TEST(Checkpoint, TrailerIsZlibCrc32) {
  const auto bytes = ma::encode_checkpoint(trained_learner(6, 1), meta("merge", 1));
  ASSERT_GT(bytes.size(), 4u);
  const auto body = bytes.size() - 4;
  const auto expected = static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(body)));
  const std::uint32_t stored = bytes[body] | (bytes[body + 1] << 8) | (bytes[body + 2] << 16) |
                               (static_cast<std::uint32_t>(bytes[body + 3]) << 24);
  EXPECT_EQ(stored, expected);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(bytes.data()), 7), "MRGCKPT");
}

TEST(Checkpoint, TruncationAndCorruptionAreDetected) {
  const auto bytes = ma::encode_checkpoint(trained_learner(6, 1), meta("merge", 1));
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  EXPECT_THROW(ma::decode_checkpoint(cut), ma::CheckpointError);
  auto flipped = bytes;
  flipped[bytes.size() / 3] ^= 0x40;
  const auto msg = error_of([&] { ma::decode_checkpoint(flipped); });
  EXPECT_NE(msg.find("checksum"), std::string::npos) << msg;
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(ma::decode_checkpoint(magic), ma::CheckpointError);
  EXPECT_THROW(ma::decode_checkpoint(std::vector<std::uint8_t>{}), ma::CheckpointError);
}

TEST(Checkpoint, DimensionMismatchIsReported) {
  const auto bytes = ma::encode_checkpoint(trained_learner(7, 1), meta("merge", 1));
  const auto msg = error_of([&] { ma::decode_checkpoint(bytes, 6); });
  EXPECT_NE(msg.find('7'), std::string::npos) << msg;
  EXPECT_NE(msg.find('6'), std::string::npos) << msg;
}

TEST(Checkpoint, FilesAreWrittenAtomically) {
  const auto dir = fs::temp_directory_path() / "merge_arena_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto path = dir / "x.ckpt";
  const auto learner = trained_learner(5, 2);
  ma::save_checkpoint(path, learner, meta("traffic", 9));
  ma::save_checkpoint(path, learner, meta("traffic", 10));
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
  EXPECT_EQ(ma::load_checkpoint(path, 5).meta.episode, 10);
  EXPECT_THROW(ma::load_checkpoint(dir / "missing.ckpt"), ma::CheckpointError);
  fs::remove_all(dir);
}

TEST(ConfigParse, SectionsCommentsAndLines) {
  const auto f = parse("# header\n[ddpg]\ngamma = 0.8 ; trailing\n\n[train]\nseed=11\n");
  ASSERT_EQ(f.entries.size(), 2u);
  EXPECT_EQ(f.entries[0].section, "ddpg");
  EXPECT_EQ(f.entries[0].key, "gamma");
  EXPECT_EQ(f.entries[0].value, "0.8");
  EXPECT_EQ(f.entries[0].line, 3);
  EXPECT_EQ(f.entries[1].line, 6);
  EXPECT_TRUE(f.has_section("train"));
  EXPECT_FALSE(f.has_section("grid"));
}

TEST(ConfigParse, MalformedLinesNameTheLine) {
  EXPECT_EQ(error_of([] { parse("[ddpg\n"); }), "test.ini:1: malformed section header");
  EXPECT_EQ(error_of([] { parse("[ddpg]\ngamma 0.8\n"); }), "test.ini:2: expected 'key = value'");
  EXPECT_EQ(error_of([] { parse("gamma = 1\n"); }), "test.ini:1: key outside of any [section]");
}

TEST(ApplyConfig, UnknownKeysAndBadValuesAreRejected) {
  auto cfg = ma::TrainConfig::defaults(ma::Variant::three_vehicle);
  EXPECT_EQ(error_of([&] { ma::apply_config(parse("[ddpg]\n\ngama = 0.8\n"), cfg); }),
            "test.ini:3: ddpg.gama: unknown key");
  EXPECT_EQ(error_of([&] { ma::apply_config(parse("[dpg]\ngamma = 0.8\n"), cfg); }),
            "test.ini:2: dpg.gamma: unknown section");
  EXPECT_EQ(error_of([&] { ma::apply_config(parse("[ddpg]\nbatch = 3.5\n"), cfg); }),
            "test.ini:2: ddpg.batch: expected an integer, got '3.5'");
  EXPECT_NE(error_of([&] { ma::apply_config(parse("[ranges]\ntiv = 2.5, 0.5\n"), cfg); }).find("lo <= hi"),
            std::string::npos);
  EXPECT_NE(error_of([&] { ma::apply_config(parse("[scene]\nvariant = four\n"), cfg); }).find("test.ini:2"),
            std::string::npos);
}

TEST(ApplyConfig, VariantResetsGridDefaults) {
  auto cfg = ma::TrainConfig::defaults(ma::Variant::three_vehicle);
  ma::apply_config(parse("[grid]\nseed = 3\n[scene]\nvariant = full_scene\n"), cfg);
  EXPECT_EQ(cfg.variant, ma::Variant::full_scene);
  EXPECT_EQ(cfg.scene.variant, ma::Variant::full_scene);
  EXPECT_EQ(cfg.summary_grid.gaps, (std::vector<double>{5, 15, 25}));
  EXPECT_EQ(cfg.summary_grid.seed, 3u);
}

TEST(ApplyConfig, RenderRoundTrips) {
  auto cfg = ma::TrainConfig::defaults(ma::Variant::full_scene);
  cfg.hyper.noise_decay = 0.99995;
  cfg.hyper.lr_actor = 1.0 / 3.0;
  cfg.reward.reward_scale = 1e-3;
  cfg.ranges.tiv = {0.6, 2.1};
  cfg.summary_grid.gaps = {5, 25};
  cfg.summary_grid.policies = {ma::PolicyKind::random};
  cfg.sim.max_steps = 700;
  cfg.seed = 123456789;
  cfg.write_episode_log = false;
  const auto text = ma::render_config(cfg);
  auto back = ma::TrainConfig::defaults(ma::Variant::three_vehicle);
  ma::apply_config(parse(text), back);
  EXPECT_EQ(ma::render_config(back), text);
  EXPECT_EQ(back.hyper.lr_actor, 1.0 / 3.0);
  EXPECT_EQ(ma::config_hash(back), ma::config_hash(cfg));
}

TEST(ApplyConfig, HashIgnoresRunLength) {
  auto a = ma::TrainConfig::defaults(ma::Variant::three_vehicle);
  auto b = a;
  b.total_episodes = 100;
  b.write_summaries = false;
  EXPECT_EQ(ma::config_hash(a), ma::config_hash(b));
  b.hyper.gamma = 0.95;
  EXPECT_NE(ma::config_hash(a), ma::config_hash(b));
}

TEST(ApplyGridConfig, ReadsOnlyGridAndSim) {
  ma::TestGrid grid = ma::TestGrid::defaults(ma::Variant::three_vehicle);
  ma::SimParams sim;
  ma::apply_grid_config(
      parse("[ddpg]\nwhatever = 1\n[grid]\ngaps = 5, 15\npolicies = constant, reactive\n[sim]\nmax_steps = 300\n"),
      grid, sim);
  EXPECT_EQ(grid.gaps, (std::vector<double>{5, 15}));
  EXPECT_EQ(grid.policies, (std::vector<ma::PolicyKind>{ma::PolicyKind::constant, ma::PolicyKind::reactive}));
  EXPECT_EQ(sim.max_steps, 300);
  EXPECT_THROW(ma::apply_grid_config(parse("[grid]\npolicies = merge\n"), grid, sim), ma::ConfigError);
}

TEST(ConfigFile, MissingFileIsItsOwnError) {
  const fs::path path = "/nonexistent/merge_arena.ini";
  try {
    ma::ConfigFile::load(path);
    FAIL() << "expected ConfigFileMissing";
  } catch (const ma::ConfigFileMissing& e) {
    EXPECT_EQ(e.path(), path);
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
}

TEST(ConfigFile, ShippedConfigsLoad) {
  for (const char* name : {"three_vehicle.ini", "full_scene.ini"}) {
    const auto path = fs::path(MERGE_ARENA_SOURCE_DIR) / "configs" / name;
    auto cfg = ma::TrainConfig::defaults(ma::Variant::three_vehicle);
    ASSERT_NO_THROW(ma::apply_config(ma::ConfigFile::load(path), cfg)) << name;
    EXPECT_NO_THROW(cfg.validate()) << name;
  }
}
