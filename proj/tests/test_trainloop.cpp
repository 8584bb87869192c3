// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "svox/errors.hpp"
#include "svox/trainloop.hpp"

#include <cmath>
#include <numbers>

using namespace svox;
using namespace svox::fixture;

namespace {

Matrix<double> random_plane(Rng& rng, Index F, Index T) {
  Matrix<double> m(F, T);
  for (Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, 0.0, 1.0);
  return m;
}

Spectrum<double> random_spectrum(Rng& rng, const StftConfig& cfg, Index T) {
  Matrix<double> phase(cfg.bins(), T);
  for (Index i = 0; i < phase.size(); ++i) phase(i) = uniform(rng, -3.0, 3.0);
  return {{random_plane(rng, cfg.bins(), T), cfg}, {phase, cfg}};
}

bool identical(const ParameterSet<double>& a, const ParameterSet<double>& b,
               Component only) {
  for (const auto& [path, value] : a)
    if (component_of(path) == only &&
        !(value.array() == b.at(path).array()).all())
      return false;
  return true;
}

}  // namespace

TEST_CASE("reconstruction_loss: oracle model, unit offset, hand-coded formula") {
  TrainConfig cfg;
  Rng rng(1);
  const Matrix<double> c = random_plane(rng, 9, 5);
  const Matrix<double> m = random_plane(rng, 9, 5);
  CHECK(reconstruction_loss(c, c, {m}, {m}, cfg).total == 0.0);
  const Matrix<double> shifted = (c.array() + 1.0).matrix();
  CHECK(reconstruction_loss(c, shifted, {m}, {m}, cfg).total ==
        doctest::Approx(0.8).epsilon(1e-15));

  for (int n = 0; n < 50; ++n) {
    cfg.lambda_c = uniform(rng, 0.1, 2.0);
    cfg.lambda_m = uniform(rng, 0.1, 2.0);
    const int k = 1 + static_cast<int>(uniform_index(rng, 4));
    std::vector<Matrix<double>> ms, mh;
    for (int i = 0; i < k; ++i) {
      ms.push_back(random_plane(rng, 7, 6));
      mh.push_back(random_plane(rng, 7, 6));
    }
    const Matrix<double> ch = random_plane(rng, 7, 6);
    const Matrix<double> cc = random_plane(rng, 7, 6);
    double expected = cfg.lambda_c * oracle::mse_loops(cc, ch);
    for (int i = 0; i < k; ++i)
      expected += cfg.lambda_m * oracle::mse_loops(ms[i], mh[i]);
    const LossReport r = reconstruction_loss(cc, ch, ms, mh, cfg);
    CHECK(std::abs(r.total - expected) < 1e-12);
    CHECK(r.message_losses.size() == static_cast<std::size_t>(k));
  }
}

TEST_CASE("loss_single / loss_multi / loss_conditional match direct network calls") {
  const StftConfig stft = tiny_stft();
  Rng rng(2);
  for (bool layer : {false, true}) {
    TrainConfig cfg;
    cfg.lambda_c = 0.7;
    cfg.lambda_m = 1.3;
    const auto single = init_model<double>(reduced_spec(1), stft, 3);
    const auto c = random_spectrum(rng, stft, 8);
    const MagSpec<double> m{random_plane(rng, stft.bins(), 8), stft};

    const LossReport s = loss_single(c, m, single, cfg, layer);
    const LossReport mu = loss_multi(c, {m}, single, cfg, layer);
    CHECK(s.total == mu.total);
    CHECK(s.carrier_loss == mu.carrier_loss);
    CHECK(s.message_losses == mu.message_losses);

    const Matrix<double> c_hat =
        carrier_decode(encode(c.magnitude.values, {m.values}, single), single);
    const Matrix<double> input =
        layer ? stft_istft_forward(c_hat, c.phase.values, stft) : c_hat;
    const Matrix<double> m_hat = message_decode(input, single, std::monostate{});
    CHECK(std::abs(s.total - (0.7 * oracle::mse_loops(c.magnitude.values, c_hat) +
                              1.3 * oracle::mse_loops(m.values, m_hat))) < 1e-12);

    // k = 3, one decoder per message.
    cfg.k = 3;
    const auto multi = init_model<double>(reduced_spec(3), stft, 4);
    std::vector<MagSpec<double>> ms;
    std::vector<Matrix<double>> planes;
    for (int i = 0; i < 3; ++i) {
      ms.push_back({random_plane(rng, stft.bins(), 8), stft});
      planes.push_back(ms.back().values);
    }
    const Matrix<double> c_hat3 =
        carrier_decode(encode(c.magnitude.values, planes, multi), multi);
    const Matrix<double> in3 =
        layer ? stft_istft_forward(c_hat3, c.phase.values, stft) : c_hat3;
    double expected = 0.7 * oracle::mse_loops(c.magnitude.values, c_hat3);
    for (int i = 0; i < 3; ++i)
      expected += 1.3 * oracle::mse_loops(planes[i], message_decode(in3, multi, i));
    CHECK(std::abs(loss_multi(c, ms, multi, cfg, layer).total - expected) < 1e-12);

    // Conditional: one decoder, one code per message.
    const auto cond = init_model<double>(reduced_spec(3, true), stft, 5);
    const Matrix<double> c_hatc =
        carrier_decode(encode(c.magnitude.values, planes, cond), cond);
    const Matrix<double> inc =
        layer ? stft_istft_forward(c_hatc, c.phase.values, stft) : c_hatc;
    expected = 0.7 * oracle::mse_loops(c.magnitude.values, c_hatc);
    for (int i = 0; i < 3; ++i)
      expected += 1.3 * oracle::mse_loops(
                            planes[i], message_decode(inc, cond, ConditionCode{i, 3}));
    CHECK(std::abs(loss_conditional(c, ms, cond, cfg, layer).total - expected) <
          1e-12);

    CHECK_THROWS_AS(loss_conditional(c, ms, multi, cfg, layer), ConfigError);
    CHECK_THROWS_AS(loss_multi(c, ms, cond, cfg, layer), ConfigError);
    CHECK_THROWS_AS(loss_single(c, m, multi, cfg, layer), ConfigError);
  }
}

TEST_CASE("adversarial terms: closed forms and floor") {
  const AdversarialTerms half = adversarial_terms(0.5, 0.5, 1.0);
  CHECK(half.generator == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(half.discriminator ==
        doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-15));
  Rng rng(6);
  for (int n = 0; n < 50; ++n) {
    const double ar = uniform(rng, 0.01, 0.99), af = uniform(rng, 0.01, 0.99);
    const double lg = uniform(rng, 0.0, 2.0);
    const AdversarialTerms t = adversarial_terms(ar, af, lg);
    CHECK(std::abs(t.generator - lg * -std::log(af)) < 1e-12);
    CHECK(std::abs(t.discriminator - (-std::log(ar) - std::log(1.0 - af))) <
          1e-12);
  }
  CHECK(std::isfinite(adversarial_terms(0.0, 1.0, 1.0).discriminator));
  CHECK(adversarial_terms(1.0, 0.0, 1.0).generator ==
        doctest::Approx(-std::log(1e-7)));

  const StftConfig stft = tiny_stft();
  TrainConfig cfg;
  cfg.lambda_g = 0.3;
  const auto model = init_model<double>(reduced_spec(1, false, true), stft, 7);
  const auto c = random_spectrum(rng, stft, 8);
  const MagSpec<double> c_hat{random_plane(rng, stft.bins(), 8), stft};
  const AdversarialTerms t = adversarial_losses(c.magnitude, c_hat, model, cfg);
  const double ar = discriminate(c.magnitude.values, model);
  const double af = discriminate(c_hat.values, model);
  CHECK(std::abs(t.generator - 0.3 * -std::log(af)) < 1e-12);
  CHECK(std::abs(t.discriminator - (-std::log(ar) - std::log(1.0 - af))) < 1e-12);
}

TEST_CASE("inject_noise: identity, RMS ratio, self-noise, renormalisation, errors") {
  Rng rng(8);
  const AudioClip c = oracle::noise_clip(rng, 4000, 16000, 0.2);
  const AudioClip n = oracle::noise_clip(rng, 5000, 16000, 0.05);
  const NoiseInjection zero = inject_noise(c, n, 0.0);
  CHECK((zero.clip.samples.array() == c.samples.array()).all());
  CHECK(zero.scale == 1.0);

  const NoiseInjection half = inject_noise(c, n, 0.5);
  REQUIRE(half.scale == 1.0);
  const Vector<double> added = half.clip.samples - c.samples;
  CHECK(oracle::relative_error(rms(added), 0.5 * rms(c.samples)) < 1e-6);
  const double snr = 20.0 * std::log10(rms(c.samples) / rms(added));
  CHECK(std::abs(snr - 6.0206) < 0.1);

  AudioClip quiet = c;
  quiet.samples *= 0.5;
  const NoiseInjection self = inject_noise(quiet, quiet, 0.5);
  CHECK((self.clip.samples - 1.5 * quiet.samples).cwiseAbs().maxCoeff() < 1e-15);

  AudioClip loud = c;
  loud.samples *= 4.0;
  const NoiseInjection clipped = inject_noise(loud, loud, 0.5);
  CHECK(clipped.clip.peak() <= 1.0 + 1e-15);
  CHECK(clipped.scale < 1.0);
  CHECK((clipped.clip.samples - 1.5 * clipped.scale * loud.samples)
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  CHECK_THROWS_AS(inject_noise(c, AudioClip{Vector<double>::Zero(5000), 16000}, 0.5),
                  InvalidInput);
  CHECK_THROWS_AS(inject_noise(c, oracle::noise_clip(rng, 100), 0.5), InvalidInput);
}

TEST_CASE("batch_loss: end-to-end gradient through the layer matches finite differences") {
  const StftConfig stft = tiny_stft();
  auto model = init_model<double>(reduced_spec(1), stft, 41);
  const ExampleBatch batch = toy_batch(42, stft, 1, 8, 2);
  TrainConfig cfg;
  ParameterSet<double> grads = zero_gradients(model);
  batch_loss(batch, model, cfg, true, &grads);

  auto loss = [&]() { return batch_loss(batch, model, cfg, true).total; };
  // Every coordinate at a step small enough that truncation is negligible;
  // at eps = 1e-3 a few bias coordinates, which shift whole planes, carry
  // O(eps^2) truncation error near the tolerance.
  std::size_t count = 0, coarse_over = 0;
  double worst = 0.0;
  for (auto& [path, value] : model.parameters)
    for (Index i = 0; i < value.size(); ++i, ++count) {
      const double g = grads.at(path)(i);
      const double fd = oracle::central_difference(loss, value(i), 1e-5);
      worst = std::max(worst, oracle::relative_error(g, fd, 1e-6));
      const double coarse = oracle::central_difference(loss, value(i), 1e-3);
      if (oracle::relative_error(g, coarse, 1e-6) >= 1e-4) ++coarse_over;
    }
  MESSAGE("worst relative error over " << count << " parameters: " << worst
                                       << "; over 1e-4 at eps 1e-3: "
                                       << coarse_over);
  CHECK(count >= 100);
  CHECK(worst < 1e-4);
  CHECK(coarse_over * 100 <= count);
}

TEST_CASE("batch_loss: adversarial generator gradient, discriminator isolation") {
  const StftConfig stft = tiny_stft();
  auto model = init_model<double>(reduced_spec(1, false, true), stft, 51);
  const ExampleBatch batch = toy_batch(52, stft, 1, 8, 2);
  TrainConfig cfg;
  cfg.lambda_g = 0.5;
  ParameterSet<double> grads = zero_gradients(model);
  const LossReport r = batch_loss(batch, model, cfg, false, &grads);
  REQUIRE(r.adversarial_loss.has_value());
  for (const auto& [path, g] : grads)
    if (component_of(path) == Component::discriminator) CHECK(g.isZero(0.0));
  auto loss = [&]() { return batch_loss(batch, model, cfg, false).total; };
  Rng rng(53);
  double worst = 0.0;
  for (const std::string path :
       {"encoder/block0/linear_weights", "carrier_decoder/block3/gate_weights",
        "carrier_decoder/output/weights"}) {
    for (int n = 0; n < 6; ++n) {
      const Index i = static_cast<Index>(
          uniform_index(rng, static_cast<std::uint64_t>(grads.at(path).size())));
      const double fd =
          oracle::central_difference(loss, model.parameters.at(path)(i), 1e-5);
      worst = std::max(worst, oracle::relative_error(grads.at(path)(i), fd, 1e-7));
    }
  }
  CHECK(worst < 1e-4);

  ParameterSet<double> d_grads = zero_gradients(model);
  const double d = discriminator_loss(batch, model, &d_grads);
  CHECK(std::isfinite(d));
  for (const auto& [path, g] : d_grads)
    if (component_of(path) != Component::discriminator) CHECK(g.isZero(0.0));
  auto dloss = [&]() { return discriminator_loss(batch, model); };
  worst = 0.0;
  for (const std::string path :
       {"discriminator/block0/linear_weights", "discriminator/block5/gate_bias",
        "discriminator/head/weights", "discriminator/head/bias"}) {
    const Index i = static_cast<Index>(
        uniform_index(rng, static_cast<std::uint64_t>(d_grads.at(path).size())));
    const double fd =
        oracle::central_difference(dloss, model.parameters.at(path)(i), 1e-5);
    worst = std::max(worst, oracle::relative_error(d_grads.at(path)(i), fd, 1e-7));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("TrainConfig: validation, schedule, digest") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.phase1() == 5000);
  TrainConfig bad = cfg;
  bad.lambda_c = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.k = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);  // single mode
  bad = cfg;
  bad.phase1_iterations = 20000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  cfg.iterations = 10;
  cfg.regime = Regime::SFS;
  CHECK(phase_at(cfg, 9).layer_active);
  cfg.regime = Regime::FTD;
  CHECK(!phase_at(cfg, 4).layer_active);
  CHECK(phase_at(cfg, 5).message_decoder_only);
  CHECK(phase_at(cfg, 5).layer_active);
  cfg.regime = Regime::FTA;
  CHECK(!phase_at(cfg, 5).message_decoder_only);
  CHECK(phase_at(cfg, 5).layer_active);
  cfg.regime = Regime::SFS_FTD;
  CHECK(phase_at(cfg, 0).layer_active);
  CHECK(!phase_at(cfg, 0).message_decoder_only);
  CHECK(phase_at(cfg, 7).message_decoder_only);

  TrainConfig other = cfg;
  CHECK(digest(other) == digest(cfg));
  other.seed = 1;
  CHECK(digest(other) != digest(cfg));
  CHECK(parse_regime("SFS+FTD") == Regime::SFS_FTD);
  CHECK_THROWS_AS(parse_regime("XYZ"), ConfigError);
}

TEST_CASE("train: plumbing, frozen groups, determinism, divergence") {
  const StftConfig stft = tiny_stft();
  auto source = [&](std::uint64_t it) { return toy_batch(it, stft, 1, 8, 2); };

  TrainConfig cfg = reduced_train_config(Regime::SFS);
  cfg.iterations = 2;
  const auto model = init_model<double>(reduced_spec(), stft, 61);
  std::vector<ModelBundle<double>> snapshots;
  TrainHooks<double> hooks;
  hooks.checkpoint_interval = 1;
  hooks.on_checkpoint = [&](int, const ModelBundle<double>& m) {
    snapshots.push_back(m);
  };
  const auto run = train<double>(source, cfg, model, hooks);
  CHECK(run.reports.size() == 2);
  CHECK(run.reports[1].iteration == 1);
  REQUIRE(snapshots.size() == 2);
  CHECK(!identical(model.parameters, snapshots[0].parameters, Component::encoder));
  CHECK(!identical(snapshots[0].parameters, snapshots[1].parameters,
                   Component::carrier_decoder));
  const auto again = train<double>(source, cfg, model);
  for (const auto& [path, value] : run.model.parameters)
    CHECK((value.array() == again.model.parameters.at(path).array()).all());

  for (Regime regime : {Regime::FTD, Regime::SFS_FTD, Regime::FTA}) {
    TrainConfig rc = reduced_train_config(regime);
    rc.iterations = 6;
    rc.phase1_iterations = 3;
    std::vector<ModelBundle<double>> snaps;
    TrainHooks<double> h;
    h.checkpoint_interval = 1;
    h.on_checkpoint = [&](int, const ModelBundle<double>& m) { snaps.push_back(m); };
    train<double>(source, rc, model, h);
    REQUIRE(snaps.size() == 6);
    for (std::size_t s = 3; s < 6; ++s) {
      const bool frozen = regime != Regime::FTA;
      for (Component c : {Component::encoder, Component::carrier_decoder})
        CHECK(identical(snaps[s - 1].parameters, snaps[s].parameters, c) == frozen);
      CHECK(!identical(snaps[s - 1].parameters, snaps[s].parameters,
                       Component::message_decoder));
    }
  }

  auto poisoned = [&](std::uint64_t it) {
    ExampleBatch b = toy_batch(it, stft, 1, 8, 2);
    b.examples[0].carrier.values(0, 0) = std::nan("");
    return b;
  };
  CHECK_THROWS_AS(train<double>(poisoned, cfg, model), NumericFailure);

  TrainConfig mismatch = cfg;
  mismatch.k = 2;
  mismatch.decoder_mode = DecoderMode::multi;
  CHECK_THROWS_AS(train<double>(source, mismatch, model), ConfigError);
}

TEST_CASE("train: adversarial alternation keeps A in [0, 1] and updates it") {
  const StftConfig stft = tiny_stft();
  auto source = [&](std::uint64_t it) { return toy_batch(it, stft, 1, 8, 2); };
  TrainConfig cfg = reduced_train_config(Regime::SFS);
  cfg.iterations = 4;
  cfg.lambda_g = 1e-3;
  const auto model = init_model<float>(reduced_spec(1, false, true), stft, 71);
  std::vector<ModelBundle<float>> snaps;
  TrainHooks<float> hooks;
  hooks.checkpoint_interval = 1;
  hooks.on_checkpoint = [&](int, const ModelBundle<float>& m) { snaps.push_back(m); };
  const auto run = train<float>(source, cfg, model, hooks);
  for (const auto& r : run.reports) {
    REQUIRE(r.discriminator_loss.has_value());
    REQUIRE(r.adversarial_loss.has_value());
    CHECK(std::isfinite(*r.discriminator_loss));
  }
  const auto& before = model.at("discriminator/head/weights");
  const auto& after = run.model.at("discriminator/head/weights");
  CHECK(!(before.array() == after.array()).all());
  const ExampleBatch b = source(0);
  for (const auto& ex : b.examples) {
    const float p = discriminate(ex.carrier.values.cast<float>().eval(), run.model);
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
}
