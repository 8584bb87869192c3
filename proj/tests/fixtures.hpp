// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Small synthetic batches and reduced models shared by the unit tests.

#pragma once

#include "svox/dsp.hpp"
#include "svox/nets.hpp"
#include "svox/random.hpp"
#include "svox/toy_speech.hpp"
#include "svox/trainloop.hpp"

#include <unistd.h>

#include <filesystem>
#include <string>

namespace svox::fixture {

inline StftConfig tiny_stft() {
  StftConfig cfg;
  cfg.fft_size = 32;
  cfg.hop = 8;
  cfg.window_length = 32;
  return cfg;
}

inline ArchitectureSpec reduced_spec(int k = 1, bool conditional = false,
                                     bool discriminator = false) {
  ArchitectureSpec spec;
  spec.kernel_count = 2;
  spec.k = k;
  spec.conditional = conditional;
  spec.discriminator = discriminator;
  return spec;
}

/// Crop of `frames` frames from the spectrum of a toy utterance.
inline Spectrum<double> toy_spectrum(std::uint64_t seed, const StftConfig& cfg,
                                     Index frames) {
  const AudioClip clip = synthesize_toy_utterance(seed, 0.5, cfg.sample_rate);
  const Spectrum<double> s = stft<double>(clip, cfg);
  Rng rng(seed);
  const Index offset =
      static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(
                                                s.magnitude.frames() - frames)));
  return {{s.magnitude.values.middleCols(offset, frames), cfg},
          {s.phase.values.middleCols(offset, frames), cfg}};
}

inline ExampleBatch toy_batch(std::uint64_t seed, const StftConfig& cfg, int k,
                              Index frames, int batch_size) {
  ExampleBatch batch;
  for (int b = 0; b < batch_size; ++b) {
    const std::uint64_t base = mix_seed(seed, static_cast<std::uint64_t>(b));
    Example ex;
    const Spectrum<double> c = toy_spectrum(base, cfg, frames);
    ex.carrier = c.magnitude;
    ex.carrier_phase = c.phase;
    for (int i = 0; i < k; ++i)
      ex.messages.push_back(
          toy_spectrum(mix_seed(base, static_cast<std::uint64_t>(i + 1)), cfg,
                       frames)
              .magnitude);
    batch.examples.push_back(std::move(ex));
  }
  return batch;
}

inline TrainConfig reduced_train_config(Regime regime, int k = 1,
                                        DecoderMode mode = DecoderMode::single) {
  TrainConfig cfg;
  cfg.regime = regime;
  cfg.k = k;
  cfg.decoder_mode = mode;
  cfg.batch_size = 2;
  cfg.frames_per_example = 8;
  return cfg;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("svox_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace svox::fixture
