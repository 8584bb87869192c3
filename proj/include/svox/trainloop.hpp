// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reconstruction and adversarial losses, noise injection, Adam, and the
// phase schedules of the four training regimes.

#pragma once

#include "svox/dense.hpp"
#include "svox/dsp.hpp"
#include "svox/nets.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace svox {

enum class Regime { FTD, SFS, FTA, SFS_FTD };
enum class DecoderMode { single, multi, conditional };

std::string to_string(Regime regime);
std::string to_string(DecoderMode mode);
Regime parse_regime(std::string_view name);
DecoderMode parse_decoder_mode(std::string_view name);

struct TrainConfig {
  Regime regime = Regime::SFS;
  int k = 1;
  DecoderMode decoder_mode = DecoderMode::single;
  double lambda_c = 0.8;
  double lambda_m = 1.0;
  /// 0 disables the adversarial term.
  double lambda_g = 0.0;
  int iterations = 10000;
  /// Length of phase 1 for the two-phase regimes; iterations / 2 when unset.
  std::optional<int> phase1_iterations;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 8;
  double noise_coeff = 0.5;
  /// Share of training messages fed flipped, so one model serves both the
  /// plain and the flipped pipeline.
  double flip_probability = 0.0;
  std::uint64_t seed = 0;
  int frames_per_example = 64;
  int log_interval = 1;

  void validate() const;
  int phase1() const;
  /// Throws ConfigError if the model's k or decoder layout disagrees.
  void check_model(const ArchitectureSpec& spec) const;
};

/// Canonical key/value listing of every field, in a fixed order.
std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg);
/// FNV-1a 64 over `describe(cfg)`.
std::uint64_t digest(const TrainConfig& cfg);

struct PhaseSettings {
  int phase = 1;
  bool layer_active = false;
  bool message_decoder_only = false;
};

/// Settings for zero-based `iteration`.
PhaseSettings phase_at(const TrainConfig& cfg, int iteration);

struct LossReport {
  double carrier_loss = 0.0;
  std::vector<double> message_losses;
  std::optional<double> adversarial_loss;
  std::optional<double> discriminator_loss;
  double total = 0.0;
  int iteration = 0;

  double mean_message_loss() const;
};

/// Where a cropped excerpt came from.
struct SourceRecord {
  std::string path;
  Index offset = 0;
};

struct Example {
  MagSpec<double> carrier;
  PhaseSpec<double> carrier_phase;
  std::vector<MagSpec<double>> messages;
  SourceRecord carrier_source;
  std::vector<SourceRecord> message_sources;
};

struct ExampleBatch {
  std::vector<Example> examples;
};

/// Mean over all entries of (a - b)^2.
template <typename Scalar>
Scalar mse(const Matrix<Scalar>& a, const Matrix<Scalar>& b);

/// The reconstruction terms for one example given decoder outputs.
/// total = lambda_c * mse(c, c_hat) + lambda_m * sum_i mse(m_i, m_hat_i).
LossReport reconstruction_loss(const Matrix<double>& c,
                               const Matrix<double>& c_hat,
                               const std::vector<Matrix<double>>& messages,
                               const std::vector<Matrix<double>>& message_hats,
                               const TrainConfig& cfg);

/// Forward outputs of one example.
template <typename Scalar>
struct Reconstruction {
  Matrix<Scalar> c_hat;
  /// What the message decoder reads: c_hat, or STFT∘ISTFT(c_hat).
  Matrix<Scalar> decoder_input;
  std::vector<Matrix<Scalar>> message_hats;
};

/// Runs encoder, carrier decoder, optional layer, and every message decoder.
template <typename Scalar>
Reconstruction<Scalar> reconstruct(const Matrix<Scalar>& carrier,
                                   const Matrix<Scalar>& carrier_phase,
                                   const std::vector<Matrix<Scalar>>& messages,
                                   const ModelBundle<Scalar>& model,
                                   bool layer_active);

/// Weighted carrier plus message loss for k = 1 in single or multi mode.
template <typename Scalar>
LossReport loss_single(const Spectrum<Scalar>& carrier,
                       const MagSpec<Scalar>& message,
                       const ModelBundle<Scalar>& model,
                       const TrainConfig& cfg, bool layer_active);

/// One decoder per message, summed message terms.
template <typename Scalar>
LossReport loss_multi(const Spectrum<Scalar>& carrier,
                      const std::vector<MagSpec<Scalar>>& messages,
                      const ModelBundle<Scalar>& model, const TrainConfig& cfg,
                      bool layer_active);

/// One decoder invoked once per condition code, summed message terms.
template <typename Scalar>
LossReport loss_conditional(const Spectrum<Scalar>& carrier,
                            const std::vector<MagSpec<Scalar>>& messages,
                            const ModelBundle<Scalar>& model,
                            const TrainConfig& cfg, bool layer_active);

/// Floor applied to the arguments of both logarithms.
inline constexpr double kLogFloor = 1e-7;

struct AdversarialTerms {
  double generator = 0.0;
  double discriminator = 0.0;
};

/// generator = lambda_g * -log A(c_hat);
/// discriminator = -log A(c) - log(1 - A(c_hat)).
AdversarialTerms adversarial_terms(double a_real, double a_fake,
                                   double lambda_g);

template <typename Scalar>
AdversarialTerms adversarial_losses(const MagSpec<Scalar>& c,
                                    const MagSpec<Scalar>& c_hat,
                                    const ModelBundle<Scalar>& model,
                                    const TrainConfig& cfg);

struct NoiseInjection {
  AudioClip clip;
  /// Multiplier applied after mixing to keep the peak <= 1 (1 if none).
  double scale = 1.0;
};

double rms(const Vector<double>& x);

/// c + coeff * (rms(c) / rms(n)) * n over the first len(c) noise samples.
NoiseInjection inject_noise(const AudioClip& carrier, const AudioClip& noise,
                            double coeff);

/// Batch-mean loss of the generator objective (reconstruction plus the
/// adversarial generator term when lambda_g > 0). Accumulates gradients for
/// every non-discriminator parameter present in `grads`.
template <typename Scalar>
LossReport batch_loss(const ExampleBatch& batch,
                      const ModelBundle<Scalar>& model, const TrainConfig& cfg,
                      bool layer_active, ParameterSet<Scalar>* grads = nullptr);

/// Batch-mean discriminator loss; gradients only for discriminator/*.
template <typename Scalar>
double discriminator_loss(const ExampleBatch& batch,
                          const ModelBundle<Scalar>& model,
                          ParameterSet<Scalar>* grads = nullptr);

template <typename Scalar>
struct AdamState {
  ParameterSet<Scalar> first;
  ParameterSet<Scalar> second;
  std::map<std::string, std::uint64_t> steps;
};

/// One bias-corrected Adam update of every parameter whose path is in
/// `grads` and passes `trainable`.
template <typename Scalar>
void adam_step(ModelBundle<Scalar>& model, const ParameterSet<Scalar>& grads,
               AdamState<Scalar>& state, const TrainConfig& cfg,
               const std::function<bool(const std::string&)>& trainable);

/// Produces the batch for a zero-based iteration.
using BatchSource = std::function<ExampleBatch(std::uint64_t iteration)>;

template <typename Scalar>
struct TrainHooks {
  std::function<void(const LossReport&)> on_report;
  /// Called after `iteration` steps have completed.
  std::function<void(int iteration, const ModelBundle<Scalar>&)> on_checkpoint;
  int checkpoint_interval = 0;
};

template <typename Scalar>
struct TrainResult {
  ModelBundle<Scalar> model;
  std::vector<LossReport> reports;
};

/// Runs the regime's schedule. One discriminator step precedes every
/// generator step when lambda_g > 0. Throws NumericFailure on NaN/Inf.
template <typename Scalar>
TrainResult<Scalar> train(const BatchSource& batches, const TrainConfig& cfg,
                          ModelBundle<Scalar> model,
                          const TrainHooks<Scalar>& hooks = {});

/// Trailing-window mean of report totals; window clipped at the start.
double smoothed_total(const std::vector<LossReport>& reports, std::size_t end,
                      std::size_t window);

}  // namespace svox
