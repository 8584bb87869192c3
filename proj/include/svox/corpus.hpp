// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// WAV corpus scanning, split assignment, and seeded carrier/message batches.

#pragma once

#include "svox/dsp.hpp"
#include "svox/random.hpp"
#include "svox/trainloop.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svox {

enum class Split { train, val, test };

std::string to_string(Split split);
/// Accepts train, val, test and the aliases dev, valid, validation.
std::optional<Split> parse_split(std::string_view name);

struct ManifestEntry {
  std::string path;
  Index samples = 0;
  Split split = Split::train;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  int sample_rate = 16000;
  /// "path: reason" for every file that was skipped.
  std::vector<std::string> diagnostics;

  std::vector<ManifestEntry> in_split(Split split) const;
};

struct SplitRule {
  /// Use a train/val/test directory directly under the root when a file has
  /// one; otherwise (or when false) fall back to the hash split.
  bool use_subdirectories = true;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
};

/// Recursive *.wav discovery, sorted by path. Throws EmptyCorpus when no
/// file is usable, InvalidInput when `root` is not a directory.
CorpusManifest scan_corpus(const std::filesystem::path& root,
                           const SplitRule& rule = {},
                           int expected_rate = 16000);

/// Seeded split of a corpus-relative path.
Split hash_split(std::string_view relative_path, const SplitRule& rule);

/// CSV with header path,samples,split.
void write_manifest_csv(const CorpusManifest& manifest,
                        const std::filesystem::path& path);
CorpusManifest read_manifest_csv(const std::filesystem::path& path,
                                 int sample_rate = 16000);

/// Decoded clips held in memory, in manifest order.
struct ClipBank {
  std::vector<AudioClip> clips;
  std::vector<std::string> paths;

  std::size_t size() const { return clips.size(); }
  bool empty() const { return clips.empty(); }
};

ClipBank load_clips(const CorpusManifest& manifest, Split split);

/// Every WAV under `dir`, regardless of split layout.
ClipBank load_noise_bank(const std::filesystem::path& dir,
                         int expected_rate = 16000);

/// Seeded synthetic babble used when no noise directory is supplied.
ClipBank synthetic_noise_bank(std::uint64_t seed, int count = 4,
                              double seconds = 3.0, int sample_rate = 16000);

/// Excerpt of exactly `length` samples starting at `offset`; zero-padded
/// past the end of the clip.
AudioClip crop(const AudioClip& clip, Index offset, Index length);

struct BatchRequest {
  int k = 1;
  int frames_per_example = 64;
  int batch_size = 8;
  double noise_coeff = 0.5;
  StftConfig stft;
  /// Chance that a message is reversed along both axes, the permutation of
  /// flip_preprocess.
  double flip_probability = 0.0;
};

/// One batch: for each example, k + 1 distinct clips (first one the carrier),
/// random crops of samples_for(frames) samples, noise on the carrier only.
/// Throws ConfigError when the bank has fewer than k + 1 clips.
ExampleBatch sample_batch(const ClipBank& bank, const BatchRequest& request,
                          const ClipBank* noise_bank, Rng& rng);

/// Deterministic per-iteration batches: iteration i draws from
/// Rng(mix_seed(seed, i)).
BatchSource make_batch_source(const ClipBank& bank, const BatchRequest& request,
                              const ClipBank* noise_bank, std::uint64_t seed);

BatchRequest batch_request(const TrainConfig& cfg, const StftConfig& stft);

}  // namespace svox
