// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Test-only reference implementations. Nothing here calls into the code
// path it is used to check.

#pragma once

#include "svox/dense.hpp"
#include "svox/dsp.hpp"
#include "svox/random.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace svox::oracle {

inline double relative_error(double analytic, double numeric,
                             double floor = 1e-8) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central finite difference of f at x along coordinate `x_ref`.
inline double central_difference(const std::function<double()>& f,
                                 double& x_ref, double eps) {
  const double saved = x_ref;
  x_ref = saved + eps;
  const double plus = f();
  x_ref = saved - eps;
  const double minus = f();
  x_ref = saved;
  return (plus - minus) / (2.0 * eps);
}

/// Direct O(N^2) DFT of one reflect-padded, windowed frame, with the same
/// magnitude normalisation and centred window placement.
inline std::vector<std::complex<double>> direct_frame_dft(
    const Vector<double>& x, const StftConfig& cfg, Index frame) {
  const Index n = x.size();
  const Index pad = cfg.window_length / 2;
  auto padded = [&](Index i) {
    Index j = i - pad;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
    return x(j);
  };
  std::vector<double> w(cfg.window_length);
  double wsum = 0.0;
  for (int i = 0; i < cfg.window_length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window_length);
    wsum += w[i];
  }
  const Index offset = (cfg.fft_size - cfg.window_length) / 2;
  std::vector<std::complex<double>> out(cfg.fft_size / 2 + 1);
  for (std::size_t f = 0; f < out.size(); ++f) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < cfg.window_length; ++i) {
      const double v = padded(frame * cfg.hop + i) * w[i];
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(f) *
                         static_cast<double>(i + offset) / cfg.fft_size;
      acc += v * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[f] = cfg.scale == MagnitudeScale::amplitude ? acc * (2.0 / wsum) : acc;
  }
  return out;
}

inline AudioClip sine(double freq, Index samples, int rate = 16000,
                      double amp = 0.5) {
  Vector<double> x(samples);
  for (Index i = 0; i < samples; ++i)
    x(i) = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return {x, rate};
}

inline AudioClip noise_clip(Rng& rng, Index samples, int rate = 16000,
                            double amp = 0.3) {
  Vector<double> x(samples);
  for (Index i = 0; i < samples; ++i) x(i) = amp * uniform(rng, -1.0, 1.0);
  return {x, rate};
}

inline double mse_loops(const Matrix<double>& a, const Matrix<double>& b) {
  double acc = 0.0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) {
      const double d = a(i, j) - b(i, j);
      acc += d * d;
    }
  return acc / static_cast<double>(a.size());
}

}  // namespace svox::oracle
