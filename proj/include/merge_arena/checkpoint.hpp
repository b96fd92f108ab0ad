#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "merge_arena/ddpg.hpp"
#include "merge_arena/types.hpp"

namespace merge_arena {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  std::uint32_t version = kCheckpointVersion;
  Variant variant = Variant::three_vehicle;
  std::string learner = "merge";  // "merge" or "traffic"
  long long episode = 0;
  std::uint32_t config_hash = 0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  CheckpointMeta meta;
  DdpgLearner learner;  // replay buffer is not persisted
};

// Little-endian container:
//   "MRGCKPT\0" | u32 version | header | networks | optimizer state | rng | u32 crc32
// The trailing CRC covers every preceding byte.
std::vector<std::uint8_t> encode_checkpoint(const DdpgLearner& learner, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             std::optional<int> expected_obs_dim = {});

// Written to a temporary file and renamed, so an existing checkpoint is never half-written.
void save_checkpoint(const std::filesystem::path& path, const DdpgLearner& learner,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<int> expected_obs_dim = {});

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace merge_arena
