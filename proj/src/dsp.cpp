// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/dsp.hpp"

#include "svox/errors.hpp"
#include "svox/random.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace svox {

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::hann:
      return "hann";
    case WindowKind::sqrt_hann:
      return "sqrt_hann";
    case WindowKind::rectangular:
      return "rectangular";
  }
  return "unknown";
}

WindowKind parse_window(std::string_view name) {
  if (name == "hann") return WindowKind::hann;
  if (name == "sqrt_hann") return WindowKind::sqrt_hann;
  if (name == "rectangular" || name == "rect") return WindowKind::rectangular;
  throw ConfigError("unknown window '" + std::string(name) + "'");
}

std::string to_string(MagnitudeScale scale) {
  return scale == MagnitudeScale::amplitude ? "amplitude" : "dft";
}

MagnitudeScale parse_magnitude_scale(std::string_view name) {
  if (name == "dft") return MagnitudeScale::dft;
  if (name == "amplitude") return MagnitudeScale::amplitude;
  throw ConfigError("unknown magnitude scale '" + std::string(name) + "'");
}

Vector<double> analysis_window(const StftConfig& cfg) {
  const Index n = cfg.window_length;
  Vector<double> w(n);
  for (Index i = 0; i < n; ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n));
    switch (cfg.window) {
      case WindowKind::hann:
        w(i) = hann;
        break;
      case WindowKind::sqrt_hann:
        w(i) = std::sqrt(hann);
        break;
      case WindowKind::rectangular:
        w(i) = 1.0;
        break;
    }
  }
  return w;
}

namespace {

// Steady-state overlap-add of `w` over one hop period.
Vector<double> steady_state_sum(const Vector<double>& w, Index hop) {
  Vector<double> acc = Vector<double>::Zero(hop);
  for (Index n = 0; n < w.size(); ++n) acc(n % hop) += w(n);
  return acc;
}

}  // namespace

double overlap_add_ripple(const StftConfig& cfg) {
  const Vector<double> acc = steady_state_sum(analysis_window(cfg), cfg.hop);
  const double mean = acc.mean();
  return mean > 0.0 ? (acc.maxCoeff() - acc.minCoeff()) / mean : 1.0;
}

void StftConfig::validate() const {
  if (fft_size < 4 || fft_size % 2 != 0)
    throw ConfigError("fft_size must be an even integer >= 4");
  if (window_length < 2 || window_length % 2 != 0 || window_length > fft_size)
    throw ConfigError("window_length must be even and in [2, fft_size]");
  if (hop < 1 || hop > window_length)
    throw ConfigError("hop must be in [1, window_length]");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");

  // With synthesis window w / sum(w^2), the analysis/synthesis product
  // overlap-adds to exactly one wherever the w^2 envelope is nonzero.
  const Vector<double> w = analysis_window(*this);
  const Vector<double> env = steady_state_sum(w.cwiseAbs2(), hop);
  const double tol = 1e-8;
  double worst = 0.0;
  for (Index n = 0; n < hop; ++n) {
    const double compensated = env(n) > tol * env.maxCoeff() ? 1.0 : 0.0;
    worst = std::max(worst, std::abs(compensated - 1.0));
  }
  if (worst > tol)
    throw ConfigError("window/hop pair violates compensated overlap-add: the "
                      "squared-window envelope vanishes");
}

namespace {

// Frame-level analysis/synthesis operators and their adjoints. Analysis maps
// a padded signal to bins x frames; synthesis is the unnormalised weighted
// overlap-add of windowed inverse transforms.
template <typename Scalar>
class SpectralEngine {
 public:
  using Complex = std::complex<Scalar>;

  explicit SpectralEngine(const StftConfig& cfg)
      : cfg_(cfg),
        window_(analysis_window(cfg).cast<Scalar>()),
        offset_((cfg.fft_size - cfg.window_length) / 2),
        frame_(cfg.fft_size),
        spectrum_(cfg.bins()) {
    cfg.validate();
    fft_.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
    scale_ = cfg.scale == MagnitudeScale::amplitude ? Scalar(2) / window_.sum()
                                                   : Scalar(1);
    // Two-sided weights: DC and Nyquist appear once, interior bins twice.
    bin_weight_ = Vector<Scalar>::Constant(cfg.bins(), Scalar(2));
    bin_weight_(0) = Scalar(1);
    bin_weight_(cfg.bins() - 1) = Scalar(1);
  }

  Index bins() const { return cfg_.bins(); }
  Index span(Index frames) const {
    return (frames - 1) * cfg_.hop + cfg_.window_length;
  }
  const Vector<Scalar>& bin_weight() const { return bin_weight_; }

  ComplexMatrix<Scalar> analyze(const Vector<Scalar>& signal, Index frames) {
    ComplexMatrix<Scalar> out(bins(), frames);
    for (Index t = 0; t < frames; ++t) {
      frame_.setZero();
      frame_.segment(offset_, cfg_.window_length) =
          signal.segment(t * cfg_.hop, cfg_.window_length)
              .cwiseProduct(window_);
      fft_.fwd(spectrum_, frame_);
      out.col(t) = spectrum_ * scale_;
    }
    return out;
  }

  // Adjoint of `analyze` treating (Re, Im) as independent real outputs.
  Vector<Scalar> analyze_adjoint(const ComplexMatrix<Scalar>& grad,
                                 Index length) {
    const Scalar n = static_cast<Scalar>(cfg_.fft_size);
    Vector<Scalar> out = Vector<Scalar>::Zero(length);
    for (Index t = 0; t < grad.cols(); ++t) {
      spectrum_ = grad.col(t) * scale_;
      spectrum_.segment(1, bins() - 2) *= Scalar(0.5);
      fft_.inv(frame_, spectrum_, cfg_.fft_size);
      out.segment(t * cfg_.hop, cfg_.window_length) +=
          (frame_.segment(offset_, cfg_.window_length) * n)
              .cwiseProduct(window_);
    }
    return out;
  }

  Vector<Scalar> synthesize(const ComplexMatrix<Scalar>& spec) {
    Vector<Scalar> out = Vector<Scalar>::Zero(span(spec.cols()));
    for (Index t = 0; t < spec.cols(); ++t) {
      spectrum_ = spec.col(t) / scale_;
      fft_.inv(frame_, spectrum_, cfg_.fft_size);
      out.segment(t * cfg_.hop, cfg_.window_length) +=
          frame_.segment(offset_, cfg_.window_length).cwiseProduct(window_);
    }
    return out;
  }

  ComplexMatrix<Scalar> synthesize_adjoint(const Vector<Scalar>& grad,
                                           Index frames) {
    const Scalar n = static_cast<Scalar>(cfg_.fft_size);
    ComplexMatrix<Scalar> out(bins(), frames);
    for (Index t = 0; t < frames; ++t) {
      frame_.setZero();
      frame_.segment(offset_, cfg_.window_length) =
          grad.segment(t * cfg_.hop, cfg_.window_length).cwiseProduct(window_);
      fft_.fwd(spectrum_, frame_);
      out.col(t) = spectrum_.cwiseProduct(bin_weight_.template cast<Complex>()) /
                   (n * scale_);
    }
    return out;
  }

  Vector<Scalar> envelope(Index frames) const {
    Vector<Scalar> env = Vector<Scalar>::Zero(span(frames));
    const Vector<Scalar> w2 = window_.cwiseAbs2();
    for (Index t = 0; t < frames; ++t)
      env.segment(t * cfg_.hop, cfg_.window_length) += w2;
    return env;
  }

 private:
  StftConfig cfg_;
  Vector<Scalar> window_;
  Index offset_;
  Scalar scale_{};
  Vector<Scalar> bin_weight_;
  Eigen::FFT<Scalar> fft_;
  Vector<Scalar> frame_;
  ComplexVector<Scalar> spectrum_;
};

template <typename Scalar>
constexpr Scalar envelope_floor() {
  return Scalar(1e-10);
}

template <typename Scalar>
Vector<Scalar> reflect_pad(const Vector<Scalar>& x, Index pad) {
  const Index n = x.size();
  Vector<Scalar> out(n + 2 * pad);
  out.segment(pad, n) = x;
  for (Index i = 1; i <= pad; ++i) {
    out(pad - i) = x(i);
    out(pad + n - 1 + i) = x(n - 1 - i);
  }
  return out;
}

template <typename Scalar>
Vector<Scalar> reflect_pad_adjoint(const Vector<Scalar>& grad, Index n,
                                   Index pad) {
  Vector<Scalar> out = grad.segment(pad, n);
  for (Index i = 1; i <= pad; ++i) {
    out(i) += grad(pad - i);
    out(n - 1 - i) += grad(pad + n - 1 + i);
  }
  return out;
}

void check_padding(Index samples, const StftConfig& cfg) {
  if (samples <= cfg.padding())
    throw InvalidInput("clip of " + std::to_string(samples) +
                       " samples is too short for reflective padding of " +
                       std::to_string(cfg.padding()));
}

// Normalised, trimmed overlap-add: ola / env over [pad, pad + length).
template <typename Scalar>
Vector<Scalar> trim_normalize(const Vector<Scalar>& ola,
                              const Vector<Scalar>& env, Index pad,
                              Index length) {
  Vector<Scalar> y = Vector<Scalar>::Zero(length);
  const Index avail = std::min<Index>(length, ola.size() - pad);
  for (Index n = 0; n < avail; ++n) {
    const Scalar e = env(pad + n);
    if (e > envelope_floor<Scalar>()) y(n) = ola(pad + n) / e;
  }
  return y;
}

template <typename Scalar>
Vector<Scalar> trim_normalize_adjoint(const Vector<Scalar>& grad,
                                      const Vector<Scalar>& env, Index pad) {
  Vector<Scalar> out = Vector<Scalar>::Zero(env.size());
  const Index avail = std::min<Index>(grad.size(), env.size() - pad);
  for (Index n = 0; n < avail; ++n) {
    const Scalar e = env(pad + n);
    if (e > envelope_floor<Scalar>()) out(pad + n) = grad(n) / e;
  }
  return out;
}

template <typename Scalar>
Scalar wrap_phase(Scalar angle) {
  return angle <= -std::numbers::pi_v<Scalar> ? std::numbers::pi_v<Scalar>
                                               : angle;
}

template <typename Scalar>
void check_shapes(const Matrix<Scalar>& a, const Matrix<Scalar>& b,
                  const StftConfig& cfg, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput(std::string(what) + ": magnitude/phase shape mismatch");
  if (a.rows() != cfg.bins())
    throw InvalidInput(std::string(what) + ": bin count " +
                       std::to_string(a.rows()) + " does not match config " +
                       std::to_string(cfg.bins()));
  if (a.cols() < 1) throw InvalidInput(std::string(what) + ": no frames");
}

}  // namespace

template <typename Scalar>
ComplexMatrix<Scalar> stft_complex(const AudioClip& clip,
                                   const StftConfig& cfg) {
  if (clip.empty()) throw InvalidInput("stft: empty clip");
  if (clip.sample_rate != cfg.sample_rate)
    throw FormatError("stft: clip sample rate " +
                      std::to_string(clip.sample_rate) +
                      " does not match configured " +
                      std::to_string(cfg.sample_rate));
  check_padding(clip.size(), cfg);
  SpectralEngine<Scalar> engine(cfg);
  const Vector<Scalar> padded =
      reflect_pad<Scalar>(clip.samples.cast<Scalar>(), cfg.padding());
  return engine.analyze(padded, cfg.frames_for(clip.size()));
}

template <typename Scalar>
Spectrum<Scalar> stft(const AudioClip& clip, const StftConfig& cfg) {
  const ComplexMatrix<Scalar> z = stft_complex<Scalar>(clip, cfg);
  Spectrum<Scalar> out{{z.cwiseAbs(), cfg}, {Matrix<Scalar>(z.rows(), z.cols()), cfg}};
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i)
      out.phase.values(i, j) = wrap_phase(std::arg(z(i, j)));
  return out;
}

template <typename Scalar>
AudioClip istft_complex(const ComplexMatrix<Scalar>& spectrum,
                        const StftConfig& cfg, std::optional<Index> length) {
  if (spectrum.rows() != cfg.bins() || spectrum.cols() < 1)
    throw InvalidInput("istft: spectrum shape does not match config");
  SpectralEngine<Scalar> engine(cfg);
  const Index frames = spectrum.cols();
  const Index n = length.value_or(cfg.samples_for(frames));
  const Vector<Scalar> y =
      trim_normalize<Scalar>(engine.synthesize(spectrum),
                             engine.envelope(frames), cfg.padding(), n);
  return AudioClip{y.template cast<double>(), cfg.sample_rate};
}

template <typename Scalar>
AudioClip istft(const MagSpec<Scalar>& mag, const PhaseSpec<Scalar>& phase,
                std::optional<Index> length) {
  check_shapes(mag.values, phase.values, mag.config, "istft");
  const ComplexMatrix<Scalar> z =
      mag.values.binaryExpr(phase.values, [](Scalar m, Scalar p) {
        return std::polar(m, p);
      });
  return istft_complex<Scalar>(z, mag.config, length);
}

template <typename Scalar>
Matrix<Scalar> stft_istft_forward(const Matrix<Scalar>& mag,
                                  const Matrix<Scalar>& phase,
                                  const StftConfig& cfg,
                                  StftLayerTape<Scalar>* tape) {
  check_shapes(mag, phase, cfg, "stft_istft_layer");
  const Index frames = mag.cols();
  const Index length = cfg.samples_for(frames);
  check_padding(length, cfg);

  SpectralEngine<Scalar> engine(cfg);
  const Matrix<Scalar> c = phase.array().cos();
  const Matrix<Scalar> s = phase.array().sin();
  ComplexMatrix<Scalar> z(mag.rows(), frames);
  z.real() = mag.cwiseProduct(c);
  z.imag() = mag.cwiseProduct(s);

  const Vector<Scalar> audio = trim_normalize<Scalar>(
      engine.synthesize(z), engine.envelope(frames), cfg.padding(), length);
  ComplexMatrix<Scalar> x =
      engine.analyze(reflect_pad<Scalar>(audio, cfg.padding()), frames);
  Matrix<Scalar> out = x.cwiseAbs();
  if (tape) {
    tape->config = cfg;
    tape->cos_phase = c;
    tape->sin_phase = s;
    tape->reanalysis = std::move(x);
    tape->length = length;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> stft_istft_backward(const StftLayerTape<Scalar>& tape,
                                   const Matrix<Scalar>& grad_output) {
  const StftConfig& cfg = tape.config;
  const ComplexMatrix<Scalar>& x = tape.reanalysis;
  if (grad_output.rows() != x.rows() || grad_output.cols() != x.cols())
    throw InvalidInput("stft_istft_backward: gradient shape mismatch");
  SpectralEngine<Scalar> engine(cfg);
  const Index frames = x.cols();

  // d|x| / d(Re x, Im x) = x / |x|, taken as zero at the origin.
  ComplexMatrix<Scalar> dx(x.rows(), frames);
  for (Index j = 0; j < frames; ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      const Scalar a = std::abs(x(i, j));
      dx(i, j) = a > Scalar(0) ? x(i, j) * (grad_output(i, j) / a)
                               : std::complex<Scalar>(0);
    }

  const Index pad = cfg.padding();
  const Vector<Scalar> d_padded =
      engine.analyze_adjoint(dx, tape.length + 2 * pad);
  const Vector<Scalar> d_audio =
      reflect_pad_adjoint<Scalar>(d_padded, tape.length, pad);
  const Vector<Scalar> d_ola =
      trim_normalize_adjoint<Scalar>(d_audio, engine.envelope(frames), pad);
  const ComplexMatrix<Scalar> dz = engine.synthesize_adjoint(d_ola, frames);
  return dz.real().cwiseProduct(tape.cos_phase) +
         dz.imag().cwiseProduct(tape.sin_phase);
}

template <typename Scalar>
MagSpec<Scalar> stft_istft_layer(const MagSpec<Scalar>& mag_hat,
                                 const PhaseSpec<Scalar>& carrier_phase) {
  return {stft_istft_forward<Scalar>(mag_hat.values, carrier_phase.values,
                                     mag_hat.config),
          mag_hat.config};
}

template <typename Scalar>
GriffinLimResult griffin_lim(const MagSpec<Scalar>& mag, int iterations,
                             std::uint64_t seed, std::optional<Index> length) {
  if (iterations < 1) throw InvalidInput("griffin_lim: iterations must be >= 1");
  if (mag.values.size() == 0 || mag.bins() != mag.config.bins())
    throw InvalidInput("griffin_lim: magnitude shape does not match config");
  if ((mag.values.array() < Scalar(0)).any())
    throw InvalidInput("griffin_lim: negative magnitudes");

  const StftConfig& cfg = mag.config;
  SpectralEngine<Scalar> engine(cfg);
  const Index frames = mag.frames();
  const Matrix<Scalar>& target = mag.values;
  const Vector<Scalar> env = engine.envelope(frames);
  const Vector<Scalar> weight = engine.bin_weight();
  auto weighted_norm = [&](const Matrix<Scalar>& m) {
    return std::sqrt(
        (m.cwiseAbs2().array().colwise() * weight.array()).sum());
  };
  const Scalar target_norm = weighted_norm(target);

  Rng rng(mix_seed(seed, 0x6c));
  ComplexMatrix<Scalar> y(target.rows(), frames);
  for (Index j = 0; j < frames; ++j)
    for (Index i = 0; i < target.rows(); ++i)
      y(i, j) = std::polar(
          target(i, j),
          static_cast<Scalar>(uniform(rng, -std::numbers::pi, std::numbers::pi)));

  const Index n = length.value_or(cfg.samples_for(frames));
  if (cfg.frames_for(n) != frames)
    throw InvalidInput("griffin_lim: length does not match the frame count");
  check_padding(n, cfg);
  const Index pad = cfg.padding();

  // Each projection is the exact least-squares inverse of the reflect-padded
  // analysis operator A = analyze * P. A^T A is diagonal, so the inverse is
  // P^T(overlap-add) / P^T(envelope); this keeps the residual non-increasing.
  auto extend = [&](const Vector<Scalar>& v) {
    Vector<Scalar> out = Vector<Scalar>::Zero(n + 2 * pad);
    out.head(v.size()) = v;
    return out;
  };
  const Vector<Scalar> denom = reflect_pad_adjoint<Scalar>(extend(env), n, pad);
  auto least_squares = [&](const ComplexMatrix<Scalar>& spec) {
    const Vector<Scalar> num =
        reflect_pad_adjoint<Scalar>(extend(engine.synthesize(spec)), n, pad);
    Vector<Scalar> x = Vector<Scalar>::Zero(n);
    for (Index i = 0; i < n; ++i)
      if (denom(i) > envelope_floor<Scalar>()) x(i) = num(i) / denom(i);
    return x;
  };

  GriffinLimResult result;
  for (int it = 0; it < iterations; ++it) {
    const ComplexMatrix<Scalar> x =
        engine.analyze(reflect_pad<Scalar>(least_squares(y), pad), frames);
    const Matrix<Scalar> amplitude = x.cwiseAbs();
    result.residuals.push_back(
        target_norm > Scalar(0)
            ? static_cast<double>(weighted_norm(amplitude - target) /
                                  target_norm)
            : 0.0);
    for (Index j = 0; j < frames; ++j)
      for (Index i = 0; i < target.rows(); ++i)
        y(i, j) = amplitude(i, j) > Scalar(0)
                      ? x(i, j) * (target(i, j) / amplitude(i, j))
                      : std::complex<Scalar>(target(i, j));
  }
  Vector<double> out = least_squares(y).template cast<double>();
  result.clip = AudioClip{std::move(out), cfg.sample_rate};
  return result;
}

double spectral_convergence(const AudioClip& clip, const MagSpec<double>& mag) {
  const Spectrum<double> s = stft<double>(clip, mag.config);
  if (s.magnitude.values.cols() != mag.frames())
    throw InvalidInput("spectral_convergence: frame count mismatch");
  const double denom = mag.values.norm();
  return denom > 0.0 ? (s.magnitude.values - mag.values).norm() / denom : 0.0;
}

#define SVOX_INSTANTIATE_DSP(S)                                              \
  template ComplexMatrix<S> stft_complex<S>(const AudioClip&,                \
                                            const StftConfig&);              \
  template Spectrum<S> stft<S>(const AudioClip&, const StftConfig&);         \
  template AudioClip istft_complex<S>(const ComplexMatrix<S>&,               \
                                      const StftConfig&,                     \
                                      std::optional<Index>);                 \
  template AudioClip istft<S>(const MagSpec<S>&, const PhaseSpec<S>&,        \
                              std::optional<Index>);                         \
  template Matrix<S> stft_istft_forward<S>(const Matrix<S>&,                 \
                                           const Matrix<S>&,                 \
                                           const StftConfig&,                \
                                           StftLayerTape<S>*);               \
  template Matrix<S> stft_istft_backward<S>(const StftLayerTape<S>&,         \
                                            const Matrix<S>&);               \
  template MagSpec<S> stft_istft_layer<S>(const MagSpec<S>&,                 \
                                          const PhaseSpec<S>&);              \
  template GriffinLimResult griffin_lim<S>(const MagSpec<S>&, int,           \
                                           std::uint64_t,                    \
                                           std::optional<Index>);

SVOX_INSTANTIATE_DSP(float)
SVOX_INSTANTIATE_DSP(double)

#undef SVOX_INSTANTIATE_DSP

}  // namespace svox
