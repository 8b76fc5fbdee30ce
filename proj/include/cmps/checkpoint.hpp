#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cmps/training.hpp"

namespace cmps {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Everything needed to resume training bit-identically.
struct Checkpoint {
  ModelParameters params;
  AdamState optimizer;
  std::size_t step = 0;
  std::uint64_t seed = 0;  ///< batch stream master seed; step k draws from rng_stream(seed, k)
  LossConfig loss;
  TrainConfig train;
};

std::string encode_checkpoint(const Checkpoint& c);
/// Throws FormatError on malformed or incompatible input.
Checkpoint decode_checkpoint(const std::string& text);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// FNV-1a of the checkpoint file bytes.
std::string checkpoint_hash(const std::filesystem::path& path);

}  // namespace cmps
