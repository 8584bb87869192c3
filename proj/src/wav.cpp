// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/wav.hpp"

#include "svox/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace svox {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::int16_t to_pcm16(double x) {
  const double v = std::nearbyint(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

struct Parsed {
  WavInfo info;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

Parsed parse(const std::vector<std::uint8_t>& bytes,
             const std::filesystem::path& path) {
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(where + ": not a RIFF/WAVE file");
  Parsed out;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(bytes.data() + pos, "data", 4) != 0)
      throw FormatError(where + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(where + ": short fmt chunk");
      out.info.format = read_u16(bytes.data() + body);
      out.info.channels = read_u16(bytes.data() + body + 2);
      out.info.sample_rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      out.info.bits_per_sample = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      out.data_offset = body;
      out.data_size = std::min<std::size_t>(size, bytes.size() - body);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) throw FormatError(where + ": missing fmt or data chunk");
  if (out.info.channels < 1 || out.info.bits_per_sample < 8)
    throw FormatError(where + ": invalid fmt chunk");
  out.info.frames = static_cast<Index>(
      out.data_size / (out.info.channels * (out.info.bits_per_sample / 8)));
  return out;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

}  // namespace

WavInfo probe_wav(const std::filesystem::path& path) {
  return parse(slurp(path), path).info;
}

AudioClip read_wav(const std::filesystem::path& path, int expected_rate) {
  const auto bytes = slurp(path);
  const Parsed p = parse(bytes, path);
  if (p.info.format != 1 || p.info.bits_per_sample != 16)
    throw FormatError(path.string() + ": only 16-bit PCM is supported");
  if (p.info.channels != 1)
    throw FormatError(path.string() + ": expected mono, found " +
                      std::to_string(p.info.channels) + " channels");
  if (expected_rate > 0 && p.info.sample_rate != expected_rate)
    throw FormatError(path.string() + ": sample rate " +
                      std::to_string(p.info.sample_rate) + " != " +
                      std::to_string(expected_rate));
  AudioClip clip{Vector<double>(p.info.frames), p.info.sample_rate};
  for (Index i = 0; i < p.info.frames; ++i) {
    const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + p.data_offset + 2 * i));
    clip.samples(i) = static_cast<double>(v) / 32768.0;
  }
  return clip;
}

void write_wav_interleaved(const std::filesystem::path& path,
                           const Vector<double>& interleaved, int channels,
                           int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  for (char c : std::string("RIFF")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  for (char c : std::string("data")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, data_bytes);
  for (Index i = 0; i < interleaved.size(); ++i)
    put_u16(out, static_cast<std::uint16_t>(to_pcm16(interleaved(i))));
  dump(path, out);
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  write_wav_interleaved(path, clip.samples, 1, clip.sample_rate);
}

AudioClip quantize_pcm16(const AudioClip& clip) {
  AudioClip out = clip;
  for (Index i = 0; i < out.size(); ++i)
    out.samples(i) = static_cast<double>(to_pcm16(out.samples(i))) / 32768.0;
  return out;
}

}  // namespace svox
