// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Seeded synthetic speech-like audio: voiced segments with formant-shaped
// harmonics and gliding pitch, fricative noise bursts and short pauses.
// Stands in for licensed corpora in tests and demos.

#pragma once

#include "svox/dsp.hpp"

#include <cstdint>
#include <filesystem>

namespace svox {

AudioClip synthesize_toy_utterance(std::uint64_t seed, double seconds,
                                   int sample_rate = 16000);

/// Several overlapping toy utterances; a stand-in for background babble.
AudioClip synthesize_babble(std::uint64_t seed, double seconds,
                            int sample_rate = 16000, int talkers = 5);

struct ToyCorpusLayout {
  int train = 20;
  int val = 5;
  int test = 5;
  double min_seconds = 0.8;
  double max_seconds = 1.6;
};

/// Writes <root>/{train,val,test}/utt_NNN.wav (16-bit PCM mono).
void write_toy_corpus(const std::filesystem::path& root,
                      const ToyCorpusLayout& layout, std::uint64_t seed,
                      int sample_rate = 16000);

}  // namespace svox
