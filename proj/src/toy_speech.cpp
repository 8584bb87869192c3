// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/toy_speech.hpp"

#include "svox/random.hpp"
#include "svox/wav.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace svox {

namespace {

struct Vowel {
  double f1, f2, f3;
};

constexpr std::array<Vowel, 8> kVowels{{{730, 1090, 2440},
                                        {270, 2290, 3010},
                                        {530, 1840, 2480},
                                        {660, 1720, 2410},
                                        {300, 870, 2240},
                                        {570, 840, 2410},
                                        {440, 1020, 2240},
                                        {490, 1350, 1690}}};

double resonance(double f, double centre, double bandwidth) {
  const double d = (f - centre) / bandwidth;
  return 1.0 / (1.0 + d * d);
}

// Raised-cosine attack/release over `ramp` samples.
double envelope(Index i, Index n, Index ramp) {
  if (ramp <= 0) return 1.0;
  if (i < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
  if (i >= n - ramp)
    return 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / ramp);
  return 1.0;
}

void add_voiced(Vector<double>& out, Index start, Index n, double f0_start,
                double f0_end, const Vowel& v, double formant_shift,
                double gain, int rate) {
  double phase = 0.0;
  const double nyquist = 0.5 * rate;
  for (Index i = 0; i < n && start + i < out.size(); ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n);
    const double f0 = f0_start + (f0_end - f0_start) * frac;
    phase += 2.0 * std::numbers::pi * f0 / rate;
    double acc = 0.0;
    for (int h = 1; h * f0 < std::min(5000.0, nyquist - 200.0); ++h) {
      const double f = h * f0;
      const double amp =
          (resonance(f, v.f1 * formant_shift, 90.0) +
           0.7 * resonance(f, v.f2 * formant_shift, 120.0) +
           0.4 * resonance(f, v.f3 * formant_shift, 160.0) + 0.02) /
          std::sqrt(static_cast<double>(h));
      acc += amp * std::sin(h * phase);
    }
    out(start + i) += gain * envelope(i, n, n / 5) * acc;
  }
}

void add_fricative(Vector<double>& out, Index start, Index n, double gain,
                   double brightness, Rng& rng) {
  double prev = 0.0, lp = 0.0;
  for (Index i = 0; i < n && start + i < out.size(); ++i) {
    const double white = uniform(rng, -1.0, 1.0);
    const double hp = white - prev;  // first difference tilts energy upward
    prev = white;
    lp += brightness * (hp - lp);
    out(start + i) += gain * envelope(i, n, n / 4) * lp;
  }
}

}  // namespace

AudioClip synthesize_toy_utterance(std::uint64_t seed, double seconds,
                                   int sample_rate) {
  Rng rng(mix_seed(seed, 0x5eec));
  const Index total = static_cast<Index>(seconds * sample_rate);
  Vector<double> x = Vector<double>::Zero(total);
  const double base_f0 = uniform(rng, 90.0, 240.0);
  const double shift = uniform(rng, 0.85, 1.15);

  Index t = static_cast<Index>(uniform(rng, 0.0, 0.08) * sample_rate);
  while (t < total) {
    const double pick = uniform01(rng);
    if (pick < 0.15) {
      t += static_cast<Index>(uniform(rng, 0.04, 0.12) * sample_rate);
    } else if (pick < 0.35) {
      const Index n = static_cast<Index>(uniform(rng, 0.05, 0.14) * sample_rate);
      add_fricative(x, t, n, uniform(rng, 0.05, 0.2), uniform(rng, 0.3, 0.9),
                    rng);
      t += n;
    } else {
      const Index n = static_cast<Index>(uniform(rng, 0.1, 0.3) * sample_rate);
      const double f0a = base_f0 * uniform(rng, 0.85, 1.15);
      const double f0b = base_f0 * uniform(rng, 0.85, 1.15);
      const Vowel& v = kVowels[uniform_index(rng, kVowels.size())];
      add_voiced(x, t, n, f0a, f0b, v, shift, uniform(rng, 0.3, 1.0),
                 sample_rate);
      t += n;
    }
  }
  const double peak = x.cwiseAbs().maxCoeff();
  if (peak > 0.0) x *= uniform(rng, 0.5, 0.9) / peak;
  return {x, sample_rate};
}

AudioClip synthesize_babble(std::uint64_t seed, double seconds,
                            int sample_rate, int talkers) {
  Vector<double> x = Vector<double>::Zero(
      static_cast<Index>(seconds * sample_rate));
  for (int i = 0; i < talkers; ++i)
    x += synthesize_toy_utterance(mix_seed(seed, 0xbab + i), seconds,
                                  sample_rate)
             .samples;
  // Room-tone floor 40 dB under the talkers keeps every excerpt audible.
  Rng rng(mix_seed(seed, 0xf100));
  const double floor = 0.01 * std::sqrt(x.squaredNorm() / std::max<double>(1.0, x.size()));
  for (Index n = 0; n < x.size(); ++n) x(n) += floor * uniform(rng, -1.0, 1.0) * std::sqrt(3.0);
  const double peak = x.cwiseAbs().maxCoeff();
  if (peak > 0.0) x *= 0.8 / peak;
  return {x, sample_rate};
}

void write_toy_corpus(const std::filesystem::path& root,
                      const ToyCorpusLayout& layout, std::uint64_t seed,
                      int sample_rate) {
  Rng rng(mix_seed(seed, 0xc0));
  std::uint64_t utterance = 0;
  auto emit = [&](const char* split, int count) {
    const auto dir = root / split;
    std::filesystem::create_directories(dir);
    for (int i = 0; i < count; ++i) {
      const double seconds =
          uniform(rng, layout.min_seconds, layout.max_seconds);
      char name[32];
      std::snprintf(name, sizeof(name), "utt_%03d.wav", i);
      write_wav(dir / name,
                synthesize_toy_utterance(mix_seed(seed, utterance++), seconds,
                                         sample_rate));
    }
  };
  emit("train", layout.train);
  emit("val", layout.val);
  emit("test", layout.test);
}

}  // namespace svox
