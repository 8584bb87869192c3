// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "svox/dsp.hpp"

#include <filesystem>

namespace svox {

struct WavInfo {
  int channels = 0;
  int sample_rate = 0;
  int bits_per_sample = 0;
  int format = 0;  // 1 = PCM
  Index frames = 0;
};

/// Parses the RIFF header only. Throws FormatError on malformed files.
WavInfo probe_wav(const std::filesystem::path& path);

/// Reads a 16-bit PCM mono file. Throws FormatError for any other layout or
/// when `expected_rate` is positive and differs from the file's rate.
AudioClip read_wav(const std::filesystem::path& path, int expected_rate = 0);

/// Writes 16-bit PCM mono; samples outside [-1, 1] are clipped.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Writes 16-bit PCM with the given channel count (interleaved frames).
/// Exists for tests and tooling that need non-mono files.
void write_wav_interleaved(const std::filesystem::path& path,
                           const Vector<double>& interleaved, int channels,
                           int sample_rate);

/// The in-memory effect of write_wav followed by read_wav.
AudioClip quantize_pcm16(const AudioClip& clip);

}  // namespace svox
