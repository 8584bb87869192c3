// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/trainloop.hpp"

#include "svox/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace svox {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::FTD:
      return "FTD";
    case Regime::SFS:
      return "SFS";
    case Regime::FTA:
      return "FTA";
    case Regime::SFS_FTD:
      return "SFS_FTD";
  }
  return "unknown";
}

std::string to_string(DecoderMode mode) {
  switch (mode) {
    case DecoderMode::single:
      return "single";
    case DecoderMode::multi:
      return "multi";
    case DecoderMode::conditional:
      return "conditional";
  }
  return "unknown";
}

Regime parse_regime(std::string_view name) {
  if (name == "FTD") return Regime::FTD;
  if (name == "SFS") return Regime::SFS;
  if (name == "FTA") return Regime::FTA;
  if (name == "SFS_FTD" || name == "SFS+FTD") return Regime::SFS_FTD;
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

DecoderMode parse_decoder_mode(std::string_view name) {
  if (name == "single") return DecoderMode::single;
  if (name == "multi") return DecoderMode::multi;
  if (name == "conditional") return DecoderMode::conditional;
  throw ConfigError("unknown decoder_mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lambda_c > 0.0) || !(lambda_m > 0.0))
    throw ConfigError("lambda_c and lambda_m must be > 0");
  if (!(lambda_g >= 0.0)) throw ConfigError("lambda_g must be >= 0");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (phase1_iterations && (*phase1_iterations < 0 ||
                            *phase1_iterations > iterations))
    throw ConfigError("phase1_iterations must lie in [0, iterations]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_epsilon > 0.0))
    throw ConfigError("Adam betas must lie in [0, 1) and epsilon be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (frames_per_example < 1) throw ConfigError("frames_per_example must be >= 1");
  if (!(noise_coeff >= 0.0)) throw ConfigError("noise_coeff must be >= 0");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    throw ConfigError("flip_probability must be in [0, 1]");
  if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (decoder_mode == DecoderMode::single && k != 1)
    throw ConfigError("decoder_mode single requires k = 1");
}

int TrainConfig::phase1() const {
  return phase1_iterations.value_or(iterations / 2);
}

void TrainConfig::check_model(const ArchitectureSpec& spec) const {
  if (spec.k != k)
    throw ConfigError("model k = " + std::to_string(spec.k) +
                      " but config k = " + std::to_string(k));
  if (spec.conditional != (decoder_mode == DecoderMode::conditional))
    throw ConfigError("decoder_mode " + to_string(decoder_mode) +
                      " does not match the model's decoder layout");
  if (lambda_g > 0.0 && !spec.discriminator)
    throw ConfigError("lambda_g > 0 needs a model with a discriminator");
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> describe(
    const TrainConfig& cfg) {
  return {
      {"regime", to_string(cfg.regime)},
      {"k", std::to_string(cfg.k)},
      {"decoder_mode", to_string(cfg.decoder_mode)},
      {"lambda_c", format_double(cfg.lambda_c)},
      {"lambda_m", format_double(cfg.lambda_m)},
      {"lambda_g", format_double(cfg.lambda_g)},
      {"iterations", std::to_string(cfg.iterations)},
      {"phase1_iterations", cfg.phase1_iterations
                                ? std::to_string(*cfg.phase1_iterations)
                                : std::string("auto")},
      {"learning_rate", format_double(cfg.learning_rate)},
      {"adam_beta1", format_double(cfg.adam_beta1)},
      {"adam_beta2", format_double(cfg.adam_beta2)},
      {"adam_epsilon", format_double(cfg.adam_epsilon)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"noise_coeff", format_double(cfg.noise_coeff)},
      {"flip_probability", format_double(cfg.flip_probability)},
      {"seed", std::to_string(cfg.seed)},
      {"frames_per_example", std::to_string(cfg.frames_per_example)},
      {"log_interval", std::to_string(cfg.log_interval)},
  };
}

std::uint64_t digest(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : describe(cfg))
    for (const char ch : key + "=" + value + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  return h;
}

PhaseSettings phase_at(const TrainConfig& cfg, int iteration) {
  const bool second = iteration >= cfg.phase1();
  switch (cfg.regime) {
    case Regime::SFS:
      return {1, true, false};
    case Regime::FTD:
      return second ? PhaseSettings{2, true, true} : PhaseSettings{1, false, false};
    case Regime::FTA:
      return second ? PhaseSettings{2, true, false}
                    : PhaseSettings{1, false, false};
    case Regime::SFS_FTD:
      return second ? PhaseSettings{2, true, true} : PhaseSettings{1, true, false};
  }
  return {};
}

double LossReport::mean_message_loss() const {
  if (message_losses.empty()) return 0.0;
  double acc = 0.0;
  for (double v : message_losses) acc += v;
  return acc / static_cast<double>(message_losses.size());
}

template <typename S>
S mse(const Matrix<S>& a, const Matrix<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("mse shape mismatch");
  if (a.size() == 0) throw InvalidInput("mse of empty arrays");
  return (a - b).squaredNorm() / static_cast<S>(a.size());
}

LossReport reconstruction_loss(const Matrix<double>& c,
                               const Matrix<double>& c_hat,
                               const std::vector<Matrix<double>>& messages,
                               const std::vector<Matrix<double>>& message_hats,
                               const TrainConfig& cfg) {
  if (messages.size() != message_hats.size())
    throw InvalidInput("message and estimate counts differ");
  LossReport report;
  report.carrier_loss = mse(c, c_hat);
  double message_sum = 0.0;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    report.message_losses.push_back(mse(messages[i], message_hats[i]));
    message_sum += report.message_losses.back();
  }
  report.total = cfg.lambda_c * report.carrier_loss + cfg.lambda_m * message_sum;
  return report;
}

namespace {

MessageSelector selector_for(const ArchitectureSpec& spec, int i) {
  if (spec.conditional) return ConditionCode{i, spec.k};
  if (spec.k == 1) return std::monostate{};
  return i;
}

template <typename S>
std::vector<Matrix<double>> to_double(const std::vector<Matrix<S>>& xs) {
  std::vector<Matrix<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x.template cast<double>());
  return out;
}

template <typename S>
void check_layer_shape(const Matrix<S>& c, const Matrix<S>& phase,
                       const StftConfig& cfg) {
  if (phase.rows() != c.rows() || phase.cols() != c.cols())
    throw InvalidInput("carrier phase shape does not match the carrier");
  if (c.rows() != cfg.bins())
    throw InvalidInput("spectrogram has " + std::to_string(c.rows()) +
                       " bins but the model's STFT config implies " +
                       std::to_string(cfg.bins()));
}

template <typename S>
LossReport loss_for_mode(const Spectrum<S>& carrier,
                         const std::vector<MagSpec<S>>& messages,
                         const ModelBundle<S>& model, const TrainConfig& cfg,
                         bool layer_active) {
  std::vector<Matrix<S>> planes;
  for (const auto& m : messages) planes.push_back(m.values);
  const Reconstruction<S> r =
      reconstruct(carrier.magnitude.values, carrier.phase.values, planes, model,
                  layer_active);
  return reconstruction_loss(carrier.magnitude.values.template cast<double>(),
                             r.c_hat.template cast<double>(), to_double(planes),
                             to_double(r.message_hats), cfg);
}

}  // namespace

template <typename S>
Reconstruction<S> reconstruct(const Matrix<S>& carrier,
                              const Matrix<S>& carrier_phase,
                              const std::vector<Matrix<S>>& messages,
                              const ModelBundle<S>& model, bool layer_active) {
  Reconstruction<S> r;
  r.c_hat = carrier_decode(encode(carrier, messages, model), model);
  if (layer_active) {
    check_layer_shape(carrier, carrier_phase, model.stft);
    r.decoder_input = stft_istft_forward(r.c_hat, carrier_phase, model.stft);
  } else {
    r.decoder_input = r.c_hat;
  }
  for (int i = 0; i < model.spec.k; ++i)
    r.message_hats.push_back(
        message_decode(r.decoder_input, model, selector_for(model.spec, i)));
  return r;
}

template <typename S>
LossReport loss_single(const Spectrum<S>& carrier, const MagSpec<S>& message,
                       const ModelBundle<S>& model, const TrainConfig& cfg,
                       bool layer_active) {
  if (model.spec.k != 1 || model.spec.conditional)
    throw ConfigError("loss_single needs a k = 1 non-conditional model");
  return loss_for_mode(carrier, {message}, model, cfg, layer_active);
}

template <typename S>
LossReport loss_multi(const Spectrum<S>& carrier,
                      const std::vector<MagSpec<S>>& messages,
                      const ModelBundle<S>& model, const TrainConfig& cfg,
                      bool layer_active) {
  if (model.spec.conditional)
    throw ConfigError("loss_multi needs a multi-decoder model");
  return loss_for_mode(carrier, messages, model, cfg, layer_active);
}

template <typename S>
LossReport loss_conditional(const Spectrum<S>& carrier,
                            const std::vector<MagSpec<S>>& messages,
                            const ModelBundle<S>& model,
                            const TrainConfig& cfg, bool layer_active) {
  if (!model.spec.conditional)
    throw ConfigError("loss_conditional needs a conditional model");
  return loss_for_mode(carrier, messages, model, cfg, layer_active);
}

AdversarialTerms adversarial_terms(double a_real, double a_fake,
                                   double lambda_g) {
  if (!(a_real >= 0.0 && a_real <= 1.0) || !(a_fake >= 0.0 && a_fake <= 1.0))
    throw std::logic_error("discriminator output outside [0, 1]");
  return {lambda_g * -std::log(std::max(a_fake, kLogFloor)),
          -std::log(std::max(a_real, kLogFloor)) -
              std::log(std::max(1.0 - a_fake, kLogFloor))};
}

template <typename S>
AdversarialTerms adversarial_losses(const MagSpec<S>& c, const MagSpec<S>& c_hat,
                                    const ModelBundle<S>& model,
                                    const TrainConfig& cfg) {
  if (!(cfg.lambda_g > 0.0))
    throw ConfigError("adversarial losses need lambda_g > 0");
  const double a_real = static_cast<double>(discriminate(c.values, model));
  const double a_fake = static_cast<double>(discriminate(c_hat.values, model));
  return adversarial_terms(a_real, a_fake, cfg.lambda_g);
}

double rms(const Vector<double>& x) {
  return x.size() == 0 ? 0.0
                       : std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

NoiseInjection inject_noise(const AudioClip& carrier, const AudioClip& noise,
                            double coeff) {
  if (carrier.empty()) throw InvalidInput("empty carrier");
  if (noise.size() < carrier.size())
    throw InvalidInput("noise clip shorter than the carrier");
  if (noise.sample_rate != carrier.sample_rate)
    throw FormatError("noise and carrier sample rates differ");
  if (coeff < 0.0) throw InvalidInput("noise coefficient must be >= 0");
  const Vector<double> n = noise.samples.head(carrier.size());
  const double p_n = rms(n);
  if (p_n == 0.0) throw InvalidInput("silent noise clip");
  if (coeff == 0.0) return {carrier, 1.0};
  NoiseInjection out{carrier, 1.0};
  out.clip.samples += (coeff * rms(carrier.samples) / p_n) * n;
  const double peak = out.clip.peak();
  if (peak > 1.0) {
    out.scale = 1.0 / peak;
    out.clip.samples *= out.scale;
  }
  return out;
}

namespace {

template <typename S>
bool has_component(const ParameterSet<S>* grads, Component c) {
  if (grads == nullptr) return false;
  for (const auto& [path, g] : *grads)
    if (component_of(path) == c) return true;
  return false;
}

}  // namespace

template <typename S>
LossReport batch_loss(const ExampleBatch& batch, const ModelBundle<S>& model,
                      const TrainConfig& cfg, bool layer_active,
                      ParameterSet<S>* grads) {
  if (batch.examples.empty()) throw InvalidInput("empty batch");
  const ArchitectureSpec& spec = model.spec;
  const bool adversarial = cfg.lambda_g > 0.0;
  const bool generator_grads = has_component(grads, Component::encoder) ||
                               has_component(grads, Component::carrier_decoder);
  const double inv_batch = 1.0 / static_cast<double>(batch.examples.size());

  LossReport mean;
  mean.message_losses.assign(static_cast<std::size_t>(spec.k), 0.0);
  if (adversarial) mean.adversarial_loss = 0.0;

  for (const Example& ex : batch.examples) {
    if (static_cast<int>(ex.messages.size()) != spec.k)
      throw ConfigError("example carries " + std::to_string(ex.messages.size()) +
                        " messages, model expects " + std::to_string(spec.k));
    const Matrix<S> c = ex.carrier.values.template cast<S>();
    const Matrix<S> phase = ex.carrier_phase.values.template cast<S>();
    std::vector<Matrix<S>> msgs;
    for (const auto& m : ex.messages) msgs.push_back(m.values.template cast<S>());

    EncodeTape<S> etape;
    DecodeTape<S> ctape;
    StftLayerTape<S> ltape;
    std::vector<DecodeTape<S>> mtapes(static_cast<std::size_t>(spec.k));
    const FeatureMap<S> h = encode(c, msgs, model, grads ? &etape : nullptr);
    const Matrix<S> c_hat = carrier_decode(h, model, grads ? &ctape : nullptr);
    Matrix<S> dec_in;
    if (layer_active) {
      check_layer_shape(c, phase, model.stft);
      dec_in = stft_istft_forward(c_hat, phase, model.stft,
                                  grads ? &ltape : nullptr);
    } else {
      dec_in = c_hat;
    }
    std::vector<Matrix<S>> m_hats;
    for (int i = 0; i < spec.k; ++i)
      m_hats.push_back(message_decode(dec_in, model, selector_for(spec, i),
                                      grads ? &mtapes[static_cast<std::size_t>(i)]
                                            : nullptr));

    const LossReport r =
        reconstruction_loss(c.template cast<double>(), c_hat.template cast<double>(),
                            to_double(msgs), to_double(m_hats), cfg);
    double total = r.total;
    DiscriminatorTape<S> atape;
    double a_fake = 0.0;
    if (adversarial) {
      a_fake = static_cast<double>(
          discriminate(c_hat, model, grads ? &atape : nullptr));
      const double g = cfg.lambda_g * -std::log(std::max(a_fake, kLogFloor));
      *mean.adversarial_loss += inv_batch * g;
      total += g;
    }
    mean.carrier_loss += inv_batch * r.carrier_loss;
    for (int i = 0; i < spec.k; ++i)
      mean.message_losses[static_cast<std::size_t>(i)] +=
          inv_batch * r.message_losses[static_cast<std::size_t>(i)];
    mean.total += inv_batch * total;

    if (grads == nullptr) continue;
    const S n = static_cast<S>(c.size());
    const S mscale = static_cast<S>(inv_batch * cfg.lambda_m * 2.0) / n;
    Matrix<S> d_dec_in = Matrix<S>::Zero(c.rows(), c.cols());
    for (int i = 0; i < spec.k; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Matrix<S> dm = mscale * (m_hats[ui] - msgs[ui]);
      const Matrix<S> dx = message_decode_backward(mtapes[ui], dm, model, grads,
                                                   generator_grads);
      if (generator_grads) d_dec_in += dx;
    }
    if (!generator_grads) continue;
    Matrix<S> d_c_hat =
        (static_cast<S>(inv_batch * cfg.lambda_c * 2.0) / n) * (c_hat - c);
    d_c_hat += layer_active ? stft_istft_backward(ltape, d_dec_in) : d_dec_in;
    if (adversarial && a_fake > kLogFloor) {
      // d(-log sigmoid(z))/dz = -(1 - sigmoid(z)); A itself is not updated.
      const S dlogit = static_cast<S>(inv_batch * cfg.lambda_g * -(1.0 - a_fake));
      d_c_hat += discriminate_backward<S>(atape, dlogit, model, nullptr);
    }
    const FeatureMap<S> dh = carrier_decode_backward(ctape, d_c_hat, model, grads);
    encode_backward(etape, dh, model, grads);
  }
  return mean;
}

template <typename S>
double discriminator_loss(const ExampleBatch& batch, const ModelBundle<S>& model,
                          ParameterSet<S>* grads) {
  if (batch.examples.empty()) throw InvalidInput("empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.examples.size());
  double loss = 0.0;
  for (const Example& ex : batch.examples) {
    const Matrix<S> c = ex.carrier.values.template cast<S>();
    std::vector<Matrix<S>> msgs;
    for (const auto& m : ex.messages) msgs.push_back(m.values.template cast<S>());
    const Matrix<S> c_hat = carrier_decode(encode(c, msgs, model), model);
    DiscriminatorTape<S> real_tape, fake_tape;
    const double a_real =
        static_cast<double>(discriminate(c, model, grads ? &real_tape : nullptr));
    const double a_fake = static_cast<double>(
        discriminate(c_hat, model, grads ? &fake_tape : nullptr));
    loss += inv_batch * adversarial_terms(a_real, a_fake, 0.0).discriminator;
    if (grads == nullptr) continue;
    if (a_real > kLogFloor)
      discriminate_backward(real_tape,
                            static_cast<S>(inv_batch * -(1.0 - a_real)), model,
                            grads, false);
    if (1.0 - a_fake > kLogFloor)
      discriminate_backward(fake_tape, static_cast<S>(inv_batch * a_fake), model,
                            grads, false);
  }
  return loss;
}

template <typename S>
void adam_step(ModelBundle<S>& model, const ParameterSet<S>& grads,
               AdamState<S>& state, const TrainConfig& cfg,
               const std::function<bool(const std::string&)>& trainable) {
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  for (const auto& [path, g] : grads) {
    if (trainable && !trainable(path)) continue;
    Matrix<S>& p = model.parameters.at(path);
    auto [m_it, m_new] = state.first.try_emplace(path, Matrix<S>::Zero(p.rows(), p.cols()));
    auto [v_it, v_new] = state.second.try_emplace(path, Matrix<S>::Zero(p.rows(), p.cols()));
    (void)m_new;
    (void)v_new;
    Matrix<S>& m = m_it->second;
    Matrix<S>& v = v_it->second;
    const std::uint64_t t = ++state.steps[path];
    m = static_cast<S>(b1) * m + static_cast<S>(1.0 - b1) * g;
    v = static_cast<S>(b2) * v + static_cast<S>(1.0 - b2) * g.cwiseAbs2();
    const S c1 = static_cast<S>(1.0 - std::pow(b1, static_cast<double>(t)));
    const S c2 = static_cast<S>(1.0 - std::pow(b2, static_cast<double>(t)));
    const S lr = static_cast<S>(cfg.learning_rate);
    const S eps = static_cast<S>(cfg.adam_epsilon);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

namespace {

template <typename S>
std::string dump_state(const ModelBundle<S>& model, const LossReport& report,
                       const PhaseSettings& phase, int iteration) {
  std::ostringstream os;
  os << "iteration " << iteration << " phase " << phase.phase
     << " layer_active " << phase.layer_active << "\n"
     << "carrier_loss " << report.carrier_loss << " total " << report.total
     << "\n";
  for (std::size_t i = 0; i < report.message_losses.size(); ++i)
    os << "message_loss[" << i << "] " << report.message_losses[i] << "\n";
  for (const auto& [path, value] : model.parameters)
    os << path << " finite=" << value.allFinite()
       << " max_abs=" << (value.size() ? value.cwiseAbs().maxCoeff() : S(0))
       << "\n";
  return os.str();
}

template <typename S>
bool finite(const ParameterSet<S>& set) {
  for (const auto& [path, value] : set)
    if (!value.allFinite()) return false;
  return true;
}

}  // namespace

template <typename S>
TrainResult<S> train(const BatchSource& batches, const TrainConfig& cfg,
                     ModelBundle<S> model, const TrainHooks<S>& hooks) {
  cfg.validate();
  cfg.check_model(model.spec);
  const bool adversarial = cfg.lambda_g > 0.0;
  AdamState<S> state;
  TrainResult<S> result;
  for (int it = 0; it < cfg.iterations; ++it) {
    const PhaseSettings phase = phase_at(cfg, it);
    const ExampleBatch batch = batches(static_cast<std::uint64_t>(it));

    std::optional<double> d_loss;
    if (adversarial && !phase.message_decoder_only) {
      ParameterSet<S> d_grads;
      for (const auto& [path, value] : model.parameters)
        if (component_of(path) == Component::discriminator)
          d_grads.emplace(path, Matrix<S>::Zero(value.rows(), value.cols()));
      d_loss = discriminator_loss(batch, model, &d_grads);
      if (!std::isfinite(*d_loss) || !finite(d_grads))
        throw NumericFailure("non-finite discriminator loss or gradient",
                             dump_state(model, LossReport{}, phase, it));
      adam_step(model, d_grads, state, cfg, {});
    }

    auto trainable = [&](const std::string& path) {
      const Component c = component_of(path);
      if (c == Component::discriminator) return false;
      return !phase.message_decoder_only || c == Component::message_decoder;
    };
    ParameterSet<S> grads;
    for (const auto& [path, value] : model.parameters)
      if (trainable(path))
        grads.emplace(path, Matrix<S>::Zero(value.rows(), value.cols()));
    LossReport report = batch_loss(batch, model, cfg, phase.layer_active, &grads);
    report.discriminator_loss = d_loss;
    report.iteration = it;
    if (!std::isfinite(report.total) || !finite(grads))
      throw NumericFailure("non-finite loss or gradient at iteration " +
                               std::to_string(it),
                           dump_state(model, report, phase, it));
    adam_step(model, grads, state, cfg, trainable);
    if (!model.all_finite())
      throw NumericFailure("non-finite parameters after iteration " +
                               std::to_string(it),
                           dump_state(model, report, phase, it));

    if (it % cfg.log_interval == 0 || it + 1 == cfg.iterations) {
      if (hooks.on_report) hooks.on_report(report);
      result.reports.push_back(std::move(report));
    }
    if (hooks.on_checkpoint && hooks.checkpoint_interval > 0 &&
        (it + 1) % hooks.checkpoint_interval == 0)
      hooks.on_checkpoint(it + 1, model);
  }
  result.model = std::move(model);
  return result;
}

double smoothed_total(const std::vector<LossReport>& reports, std::size_t end,
                      std::size_t window) {
  end = std::min(end, reports.size());
  if (end == 0 || window == 0) throw InvalidInput("empty smoothing window");
  const std::size_t begin = end > window ? end - window : 0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += reports[i].total;
  return acc / static_cast<double>(end - begin);
}

#define SVOX_INSTANTIATE_TRAINLOOP(S)                                           \
  template S mse<S>(const Matrix<S>&, const Matrix<S>&);                        \
  template Reconstruction<S> reconstruct<S>(                                    \
      const Matrix<S>&, const Matrix<S>&, const std::vector<Matrix<S>>&,        \
      const ModelBundle<S>&, bool);                                             \
  template LossReport loss_single<S>(const Spectrum<S>&, const MagSpec<S>&,     \
                                     const ModelBundle<S>&,                     \
                                     const TrainConfig&, bool);                 \
  template LossReport loss_multi<S>(const Spectrum<S>&,                         \
                                    const std::vector<MagSpec<S>>&,             \
                                    const ModelBundle<S>&, const TrainConfig&,  \
                                    bool);                                      \
  template LossReport loss_conditional<S>(                                      \
      const Spectrum<S>&, const std::vector<MagSpec<S>>&,                       \
      const ModelBundle<S>&, const TrainConfig&, bool);                         \
  template AdversarialTerms adversarial_losses<S>(                              \
      const MagSpec<S>&, const MagSpec<S>&, const ModelBundle<S>&,              \
      const TrainConfig&);                                                      \
  template LossReport batch_loss<S>(const ExampleBatch&,                        \
                                    const ModelBundle<S>&, const TrainConfig&,  \
                                    bool, ParameterSet<S>*);                    \
  template double discriminator_loss<S>(const ExampleBatch&,                    \
                                        const ModelBundle<S>&,                  \
                                        ParameterSet<S>*);                      \
  template void adam_step<S>(ModelBundle<S>&, const ParameterSet<S>&,           \
                             AdamState<S>&, const TrainConfig&,                 \
                             const std::function<bool(const std::string&)>&);  \
  template TrainResult<S> train<S>(const BatchSource&, const TrainConfig&,      \
                                   ModelBundle<S>, const TrainHooks<S>&);

SVOX_INSTANTIATE_TRAINLOOP(float)
SVOX_INSTANTIATE_TRAINLOOP(double)

}  // namespace svox
