// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Versioned binary checkpoints. Layout, all integers little-endian:
//
//   "SVOX" | u32 version
//   spec:  i32 kernel_count, encoder_blocks, carrier_decoder_blocks,
//          message_decoder_blocks, discriminator_layers, k;
//          u8 conditional, u8 discriminator
//   stft:  i32 fft_size, hop, window_length, sample_rate; u8 window, u8 scale
//   u64 train-config digest | u8 regime | i64 iteration
//   u64 init seed | u64 data seed
//   u32 record count, then per record:
//          u32 path length, path bytes, u32 rows, u32 cols,
//          rows * cols float32 in row-major order
//   u32 CRC-32 of every preceding byte

#pragma once

#include "svox/nets.hpp"
#include "svox/trainloop.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace svox {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelBundle<float> model;
  std::uint64_t config_digest = 0;
  Regime regime = Regime::SFS;
  std::int64_t iteration = 0;
  /// Batch i of a run is drawn from Rng(mix_seed(data_seed, i)), so this and
  /// `iteration` pin the sampler state.
  std::uint64_t data_seed = 0;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws ChecksumError when the trailing CRC disagrees, FormatError on any
/// structural problem (bad magic, version, missing or duplicate records).
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace svox
