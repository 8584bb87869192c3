// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/corpus.hpp"

#include "svox/errors.hpp"
#include "svox/toy_speech.hpp"
#include "svox/wav.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace svox {

namespace fs = std::filesystem;

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "unknown";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val" || name == "dev" || name == "valid" || name == "validation")
    return Split::val;
  if (name == "test") return Split::test;
  return std::nullopt;
}

std::vector<ManifestEntry> CorpusManifest::in_split(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

Split hash_split(std::string_view relative_path, const SplitRule& rule) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : relative_path) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  const double u =
      static_cast<double>(mix_seed(h, rule.seed) >> 11) * 0x1.0p-53;
  if (u < rule.train_fraction) return Split::train;
  if (u < rule.train_fraction + rule.val_fraction) return Split::val;
  return Split::test;
}

CorpusManifest scan_corpus(const fs::path& root, const SplitRule& rule,
                           int expected_rate) {
  if (!fs::is_directory(root))
    throw InvalidInput("corpus root '" + root.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  CorpusManifest manifest;
  manifest.sample_rate = expected_rate;
  for (const fs::path& file : files) {
    const fs::path rel = fs::relative(file, root);
    try {
      const WavInfo info = probe_wav(file);
      if (info.format != 1 || info.bits_per_sample != 16)
        throw FormatError("not 16-bit PCM");
      if (info.channels != 1)
        throw FormatError(std::to_string(info.channels) +
                          " channels, expected mono");
      if (info.sample_rate != expected_rate)
        throw FormatError(std::to_string(info.sample_rate) + " Hz, expected " +
                          std::to_string(expected_rate));
      if (info.frames == 0) throw FormatError("no samples");
      std::optional<Split> split;
      if (rule.use_subdirectories && rel.has_parent_path())
        split = parse_split(rel.begin()->string());
      manifest.entries.push_back(
          {file.string(), info.frames,
           split.value_or(hash_split(rel.generic_string(), rule))});
    } catch (const Error& e) {
      manifest.diagnostics.push_back(file.string() + ": " + e.what());
    }
  }
  if (manifest.entries.empty())
    throw EmptyCorpus("no usable WAV files under '" + root.string() + "'" +
                      (manifest.diagnostics.empty()
                           ? std::string()
                           : " (" + std::to_string(manifest.diagnostics.size()) +
                                 " rejected)"));
  return manifest;
}

void write_manifest_csv(const CorpusManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << "path,samples,split\n";
  for (const auto& e : manifest.entries) {
    if (e.path.find_first_of(",\n\"") != std::string::npos)
      throw InvalidInput("path not representable in the manifest: " + e.path);
    out << e.path << ',' << e.samples << ',' << to_string(e.split) << '\n';
  }
}

CorpusManifest read_manifest_csv(const fs::path& path, int sample_rate) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "path,samples,split")
    throw FormatError("manifest header must be 'path,samples,split'");
  CorpusManifest manifest;
  manifest.sample_rate = sample_rate;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b)
      throw FormatError("manifest row " + std::to_string(row) + " malformed");
    const auto split = parse_split(line.substr(b + 1));
    if (!split)
      throw FormatError("manifest row " + std::to_string(row) + " bad split");
    try {
      manifest.entries.push_back(
          {line.substr(0, a), std::stoll(line.substr(a + 1, b - a - 1)), *split});
    } catch (const std::logic_error&) {
      throw FormatError("manifest row " + std::to_string(row) + " bad samples");
    }
  }
  if (manifest.entries.empty()) throw EmptyCorpus("manifest has no entries");
  return manifest;
}

ClipBank load_clips(const CorpusManifest& manifest, Split split) {
  ClipBank bank;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    bank.clips.push_back(read_wav(e.path, manifest.sample_rate));
    bank.paths.push_back(e.path);
  }
  return bank;
}

ClipBank load_noise_bank(const fs::path& dir, int expected_rate) {
  SplitRule rule;
  rule.use_subdirectories = false;
  const CorpusManifest manifest = scan_corpus(dir, rule, expected_rate);
  ClipBank bank;
  for (const auto& e : manifest.entries) {
    bank.clips.push_back(read_wav(e.path, expected_rate));
    bank.paths.push_back(e.path);
  }
  return bank;
}

ClipBank synthetic_noise_bank(std::uint64_t seed, int count, double seconds,
                              int sample_rate) {
  ClipBank bank;
  for (int i = 0; i < count; ++i) {
    bank.clips.push_back(synthesize_babble(
        mix_seed(seed, static_cast<std::uint64_t>(i)), seconds, sample_rate));
    bank.paths.push_back("<babble:" + std::to_string(seed) + ":" +
                         std::to_string(i) + ">");
  }
  return bank;
}

AudioClip crop(const AudioClip& clip, Index offset, Index length) {
  AudioClip out{Vector<double>::Zero(length), clip.sample_rate};
  const Index n = std::max<Index>(0, std::min(length, clip.size() - offset));
  if (n > 0) out.samples.head(n) = clip.samples.segment(offset, n);
  return out;
}

namespace {

Index random_offset(Rng& rng, Index available, Index length) {
  return available > length
             ? static_cast<Index>(uniform_index(
                   rng, static_cast<std::uint64_t>(available - length + 1)))
             : 0;
}

// Noise excerpt of `length` samples; short noise clips are looped.
AudioClip noise_excerpt(const AudioClip& noise, Rng& rng, Index length) {
  if (noise.size() >= length)
    return crop(noise, random_offset(rng, noise.size(), length), length);
  AudioClip out{Vector<double>(length), noise.sample_rate};
  for (Index i = 0; i < length; ++i) out.samples(i) = noise.samples(i % noise.size());
  return out;
}

}  // namespace

ExampleBatch sample_batch(const ClipBank& bank, const BatchRequest& request,
                          const ClipBank* noise_bank, Rng& rng) {
  request.stft.validate();
  if (request.k < 1 || request.batch_size < 1 || request.frames_per_example < 2)
    throw ConfigError("batch request needs k >= 1, batch_size >= 1, frames >= 2");
  const std::size_t needed = static_cast<std::size_t>(request.k) + 1;
  if (bank.size() < needed)
    throw ConfigError("split has " + std::to_string(bank.size()) +
                      " clips; k = " + std::to_string(request.k) + " needs " +
                      std::to_string(needed) + " distinct clips");
  const bool noisy =
      noise_bank != nullptr && !noise_bank->empty() && request.noise_coeff > 0.0;
  const Index length = request.stft.samples_for(request.frames_per_example);

  ExampleBatch batch;
  std::vector<std::size_t> order(bank.size());
  for (int b = 0; b < request.batch_size; ++b) {
    // Partial Fisher-Yates: the first k + 1 slots are distinct clips.
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < needed; ++i)
      std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);

    // Noise draws use their own stream so clean and noisy runs select the
    // same clips and offsets.
    const std::uint64_t stream = rng();
    Rng noise_rng(stream);
    Rng flip_rng(mix_seed(stream, 0xf11b));
    Example ex;
    for (std::size_t j = 0; j < needed; ++j) {
      const AudioClip& clip = bank.clips[order[j]];
      const Index offset = random_offset(rng, clip.size(), length);
      AudioClip excerpt = crop(clip, offset, length);
      const SourceRecord source{bank.paths[order[j]], offset};
      if (j == 0) {
        if (noisy) {
          const AudioClip& noise =
              noise_bank->clips[uniform_index(noise_rng, noise_bank->size())];
          const AudioClip n = noise_excerpt(noise, noise_rng, length);
          // A silent excerpt has no level to scale; the carrier stays clean.
          if (n.samples.cwiseAbs().maxCoeff() > 0.0)
            excerpt = inject_noise(excerpt, n, request.noise_coeff).clip;
        }
        Spectrum<double> s = stft<double>(excerpt, request.stft);
        ex.carrier = std::move(s.magnitude);
        ex.carrier_phase = std::move(s.phase);
        ex.carrier_source = source;
      } else {
        ex.messages.push_back(stft<double>(excerpt, request.stft).magnitude);
        if (request.flip_probability > 0.0 &&
            uniform(flip_rng, 0.0, 1.0) < request.flip_probability)
          ex.messages.back().values = ex.messages.back().values.reverse().eval();
        ex.message_sources.push_back(source);
      }
    }
    batch.examples.push_back(std::move(ex));
  }
  return batch;
}

BatchSource make_batch_source(const ClipBank& bank, const BatchRequest& request,
                              const ClipBank* noise_bank, std::uint64_t seed) {
  return [&bank, request, noise_bank, seed](std::uint64_t iteration) {
    Rng rng(mix_seed(seed, iteration));
    return sample_batch(bank, request, noise_bank, rng);
  };
}

BatchRequest batch_request(const TrainConfig& cfg, const StftConfig& stft) {
  return {cfg.k, cfg.frames_per_example, cfg.batch_size, cfg.noise_coeff, stft,
          cfg.flip_probability};
}

}  // namespace svox
