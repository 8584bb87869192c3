// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Short-time Fourier analysis/synthesis written as explicit linear operators,
// so that STFT(ISTFT(.)) can sit inside a training graph with exact adjoints.

#pragma once

#include "svox/dense.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svox {

enum class WindowKind { hann, sqrt_hann, rectangular };

std::string to_string(WindowKind kind);
WindowKind parse_window(std::string_view name);

/// Magnitude normalisation. `dft` is the plain windowed DFT modulus; with
/// `amplitude` a unit sinusoid centred on a bin reads 1 (scale 2 / sum(w)).
enum class MagnitudeScale { dft, amplitude };

std::string to_string(MagnitudeScale scale);
MagnitudeScale parse_magnitude_scale(std::string_view name);

struct StftConfig {
  int fft_size = 512;
  int hop = 160;
  int window_length = 512;
  WindowKind window = WindowKind::hann;
  int sample_rate = 16000;
  MagnitudeScale scale = MagnitudeScale::dft;

  Index bins() const { return fft_size / 2 + 1; }
  /// Reflective padding applied to both ends before framing.
  Index padding() const { return window_length / 2; }
  /// Frame count produced by `stft` for a clip of `samples` samples.
  Index frames_for(Index samples) const { return samples / hop + 1; }
  /// Clip length whose analysis yields exactly `frames` frames.
  Index samples_for(Index frames) const { return (frames - 1) * hop; }

  /// Throws ConfigError unless the window/hop pair is exactly invertible
  /// with window-sum-square compensation.
  void validate() const;

  bool operator==(const StftConfig&) const = default;
};

/// Periodic analysis window of length `window_length`.
Vector<double> analysis_window(const StftConfig& cfg);

/// Peak-to-peak ripple of the raw window overlap-add, relative to its mean.
/// Zero for COLA pairs such as Hann 512/128; about 0.027 for Hann 512/160.
double overlap_add_ripple(const StftConfig& cfg);

/// Mono waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  Vector<double> samples;
  int sample_rate = 16000;

  Index size() const { return samples.size(); }
  bool empty() const { return samples.size() == 0; }
  double peak() const {
    return empty() ? 0.0 : samples.cwiseAbs().maxCoeff();
  }
};

/// bins x frames grid of STFT magnitudes.
template <typename Scalar>
struct MagSpec {
  Matrix<Scalar> values;
  StftConfig config;

  Index bins() const { return values.rows(); }
  Index frames() const { return values.cols(); }
};

/// bins x frames grid of STFT phases in (-pi, pi].
template <typename Scalar>
struct PhaseSpec {
  Matrix<Scalar> values;
  StftConfig config;

  Index bins() const { return values.rows(); }
  Index frames() const { return values.cols(); }
};

template <typename Scalar>
struct Spectrum {
  MagSpec<Scalar> magnitude;
  PhaseSpec<Scalar> phase;
};

// Magnitudes follow cfg.scale; the synthesis side undoes the scaling.

/// Complex STFT of `clip` (reflect-padded by window_length/2).
template <typename Scalar>
ComplexMatrix<Scalar> stft_complex(const AudioClip& clip, const StftConfig& cfg);

template <typename Scalar>
Spectrum<Scalar> stft(const AudioClip& clip, const StftConfig& cfg);

/// Overlap-add inverse. `length` defaults to samples_for(frames).
template <typename Scalar>
AudioClip istft_complex(const ComplexMatrix<Scalar>& spectrum,
                        const StftConfig& cfg,
                        std::optional<Index> length = std::nullopt);

template <typename Scalar>
AudioClip istft(const MagSpec<Scalar>& mag, const PhaseSpec<Scalar>& phase,
                std::optional<Index> length = std::nullopt);

/// Everything the STFT∘ISTFT backward pass needs from its forward pass.
template <typename Scalar>
struct StftLayerTape {
  StftConfig config;
  Matrix<Scalar> cos_phase;
  Matrix<Scalar> sin_phase;
  ComplexMatrix<Scalar> reanalysis;
  Index length = 0;
};

/// |STFT(ISTFT(mag * exp(i*phase)))| on raw matrices. The phase is a
/// constant of the layer; only `mag` receives gradient.
template <typename Scalar>
Matrix<Scalar> stft_istft_forward(const Matrix<Scalar>& mag,
                                  const Matrix<Scalar>& phase,
                                  const StftConfig& cfg,
                                  StftLayerTape<Scalar>* tape = nullptr);

/// Vector-Jacobian product of stft_istft_forward with respect to `mag`.
template <typename Scalar>
Matrix<Scalar> stft_istft_backward(const StftLayerTape<Scalar>& tape,
                                   const Matrix<Scalar>& grad_output);

template <typename Scalar>
MagSpec<Scalar> stft_istft_layer(const MagSpec<Scalar>& mag_hat,
                                 const PhaseSpec<Scalar>& carrier_phase);

struct GriffinLimResult {
  AudioClip clip;
  /// Spectral-convergence residual after each iteration (two-sided norm).
  std::vector<double> residuals;
};

/// Griffin-Lim phase recovery from a seeded uniform random initial phase.
template <typename Scalar>
GriffinLimResult griffin_lim(const MagSpec<Scalar>& mag, int iterations = 50,
                             std::uint64_t seed = 0,
                             std::optional<Index> length = std::nullopt);

/// ||(|STFT(clip)| - mag)|| / ||mag|| with the public analysis convention.
double spectral_convergence(const AudioClip& clip, const MagSpec<double>& mag);

}  // namespace svox
