// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "svox/corpus.hpp"
#include "svox/errors.hpp"
#include "svox/stego.hpp"
#include "svox/wav.hpp"

#include <fstream>
#include <sstream>

using namespace svox;
using namespace svox::fixture;
namespace fs = std::filesystem;

namespace {

// Carrier decoder that copies the carrier plane exactly; message decoders
// output a constant `message_bias`.
ModelBundle<double> copy_model(int k, bool conditional, double message_bias) {
  ModelBundle<double> model =
      init_model<double>(reduced_spec(k, conditional), tiny_stft(), 3);
  for (auto& [path, value] : model.parameters) value.setZero();
  const int K = model.spec.kernel_count;
  constexpr int kCentre = 4;
  for (int b = 0; b < model.spec.carrier_decoder_blocks; ++b) {
    const std::string p = "carrier_decoder/block" + std::to_string(b) + "/";
    model.parameters.at(p + "linear_weights")(0, (b == 0 ? K : 0) * 9 + kCentre) = 1.0;
    model.parameters.at(p + "gate_bias").setConstant(50.0);
  }
  model.parameters.at("carrier_decoder/output/weights")(0, 0) = 1.0;
  for (auto& [path, value] : model.parameters)
    if (path.rfind("message_decoder/", 0) == 0 &&
        path.find("/output/bias") != std::string::npos)
      value.setConstant(message_bias);
  return model;
}

ClipBank toy_bank(const TempDir& dir, int clips, double seconds = 0.4) {
  for (int i = 0; i < clips; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "c%02d.wav", i);
    write_wav(dir / name, synthesize_toy_utterance(40 + i, seconds));
  }
  SplitRule rule;
  rule.train_fraction = 1.0;
  return load_clips(scan_corpus(dir.path(), rule), Split::train);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("flip_preprocess: involution, index map, energy") {
  Rng rng(1);
  MagSpec<double> m{Matrix<double>(7, 5), tiny_stft()};
  for (Index i = 0; i < m.values.size(); ++i) m.values(i) = uniform(rng, 0.0, 1.0);
  const MagSpec<double> f = flip_preprocess(m);
  CHECK((flip_preprocess(f).values.array() == m.values.array()).all());
  CHECK(f.values.squaredNorm() == doctest::Approx(m.values.squaredNorm()).epsilon(1e-15));

  MagSpec<double> one{Matrix<double>::Zero(7, 5), tiny_stft()};
  one.values(2, 1) = 3.0;
  const MagSpec<double> moved = flip_preprocess(one);
  CHECK(moved.values(7 - 1 - 2, 5 - 1 - 1) == 3.0);
  CHECK(moved.values.sum() == 3.0);
}

TEST_CASE("hide: duration, network output, flip placement, errors") {
  const ModelBundle<double> model = init_model<double>(reduced_spec(2), tiny_stft(), 7);
  const AudioClip carrier = synthesize_toy_utterance(1, 0.1);
  const AudioClip m0 = synthesize_toy_utterance(2, 0.2);  // longer: cropped
  const AudioClip m1 = synthesize_toy_utterance(3, 0.05);  // shorter: padded
  const StegoArtifacts art = hide(carrier, {m0, m1}, model);
  CHECK(art.stego_wav.size() == carrier.size());
  CHECK(art.messages[0].frames() == art.carrier.frames());
  CHECK(art.messages[1].frames() == art.carrier.frames());

  const Matrix<double> direct =
      carrier_decode(encode<double>(art.carrier.values,
                                    {art.messages[0].values, art.messages[1].values},
                                    model),
                     model);
  CHECK((art.carrier_hat.values.array() == direct.cwiseMax(0.0).array()).all());
  const AudioClip resynth = istft(art.carrier_hat, art.carrier_phase, carrier.size());
  CHECK((art.stego_wav.samples - resynth.samples * art.peak_scale).cwiseAbs().maxCoeff() <
        1e-12);

  // The flip is applied to the network input only.
  const StegoArtifacts flipped = hide(carrier, {m0, m1}, model, true);
  const Matrix<double> direct_flip = carrier_decode(
      encode<double>(art.carrier.values,
                     {flip_preprocess(art.messages[0]).values,
                      flip_preprocess(art.messages[1]).values},
                     model),
      model);
  CHECK((flipped.carrier_hat.values.array() == direct_flip.cwiseMax(0.0).array()).all());
  CHECK((flipped.messages[0].values.array() == art.messages[0].values.array()).all());

  CHECK_THROWS_AS(hide(carrier, {m0}, model), ConfigError);
  CHECK_THROWS_AS(hide(AudioClip{}, {m0, m1}, model), InvalidInput);
  CHECK_THROWS_AS(hide(AudioClip{carrier.samples, 8000}, {m0, m1}, model), InvalidInput);
  const AudioClip overlong{Vector<double>::Zero(kMaxHideFrames * tiny_stft().hop), 16000};
  CHECK_THROWS_AS(hide(overlong, {m0, m1}, model), InvalidInput);
}

TEST_CASE("hide: peak protection records the applied scale") {
  ModelBundle<double> model = copy_model(1, false, 0.0);
  model.parameters.at("carrier_decoder/output/weights")(0, 0) = 400.0;
  const AudioClip carrier = synthesize_toy_utterance(5, 0.1);
  const StegoArtifacts art = hide(carrier, {synthesize_toy_utterance(6, 0.1)}, model);
  CHECK(art.peak_scale < 1.0);
  CHECK(art.stego_wav.samples.cwiseAbs().maxCoeff() <= 32767.0 / 32768.0 + 1e-15);
  const AudioClip raw = istft(art.carrier_hat, art.carrier_phase, carrier.size());
  CHECK((art.stego_wav.samples - raw.samples * art.peak_scale).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("reveal: decoder output, confidence flag, selectors") {
  const ModelBundle<double> model = init_model<double>(reduced_spec(3, true), tiny_stft(), 9);
  const AudioClip x = synthesize_toy_utterance(8, 0.1);
  RevealOptions opt;
  opt.gl_iterations = 4;
  const RevealResult r = reveal(x, model, ConditionCode{1, 3}, opt);
  const Matrix<double> raw = message_decode<double>(
      stft<double>(x, tiny_stft()).magnitude.values, model, ConditionCode{1, 3});
  CHECK((r.magnitude.values.array() == raw.cwiseMax(0.0).array()).all());
  CHECK(r.message.size() == x.size());
  CHECK(r.negative_energy ==
        doctest::Approx(raw.cwiseMin(0.0).squaredNorm() / raw.squaredNorm()));

  opt.flip = true;
  const RevealResult rf = reveal(x, model, ConditionCode{1, 3}, opt);
  CHECK((rf.magnitude.values.array() == raw.reverse().cwiseMax(0.0).array()).all());

  CHECK_THROWS_AS(reveal(x, model, 1, opt), ConfigError);
  CHECK_THROWS_AS(reveal(x, model, ConditionCode{3, 3}, opt), ConfigError);

  // Negative and silent decodings are flagged; a plausible level is not.
  opt.gl_iterations = 0;
  CHECK(reveal(x, copy_model(1, false, -1.0), std::monostate{}, opt).low_confidence);
  CHECK(reveal(x, copy_model(1, false, 0.0), std::monostate{}, opt).low_confidence);
  const double level = stft<double>(x, tiny_stft()).magnitude.values.mean();
  const RevealResult ok = reveal(x, copy_model(1, false, level), std::monostate{}, opt);
  CHECK(!ok.low_confidence);
  CHECK(ok.negative_energy == 0.0);
}

TEST_CASE("summarize: mean, population std, interpolated percentiles") {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(100.0 - i);
  const MetricSummary s = summarize(v);
  CHECK(s.mean == doctest::Approx(50.0));
  CHECK(s.std == doctest::Approx(std::sqrt(850.0)));
  CHECK(s.p5 == doctest::Approx(5.0));
  CHECK(s.p95 == doctest::Approx(95.0));
  const MetricSummary two = summarize({1.0, 3.0});
  CHECK(two.p5 == doctest::Approx(1.1));
  CHECK(two.p95 == doctest::Approx(2.9));
}

TEST_CASE("evaluate: closed-form terms, shared loss path, determinism") {
  TempDir dir("eval");
  const ClipBank bank = toy_bank(dir, 6);
  EvalOptions opt;
  opt.n_examples = 6;
  opt.seed = 4;
  opt.frames_per_example = 10;

  // Exact carrier copy and zero message output: carrier 0, message E[m^2].
  const ModelBundle<double> copy = copy_model(2, false, 0.0);
  const EvalReport r = evaluate(copy, bank, opt);
  CHECK(r.k == 2);
  CHECK(r.decoder_mode == DecoderMode::multi);
  CHECK(r.carrier_mse.mean == 0.0);
  CHECK(r.carrier_mse_wav->mean < 1e-6);

  BatchRequest req;
  req.k = 2;
  req.frames_per_example = 10;
  req.batch_size = 6;
  req.noise_coeff = 0.0;
  req.stft = tiny_stft();
  Rng rng(4);
  const ExampleBatch batch = sample_batch(bank, req, nullptr, rng);
  for (std::size_t e = 0; e < batch.examples.size(); ++e)
    for (std::size_t i = 0; i < 2; ++i) {
      const double expected = batch.examples[e].messages[i].values.squaredNorm() /
                              static_cast<double>(batch.examples[e].messages[i].values.size());
      CHECK(r.samples.messages[i][e] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(r.samples.messages_wav[i][e] == doctest::Approx(expected).epsilon(1e-12));
    }

  // A random model: every term equals the trainloop loss of the same example.
  const ModelBundle<double> model = init_model<double>(reduced_spec(2, true), tiny_stft(), 5);
  const EvalReport rr = evaluate(model, bank, opt);
  TrainConfig cfg;
  cfg.k = 2;
  cfg.decoder_mode = DecoderMode::conditional;
  for (std::size_t e = 0; e < batch.examples.size(); ++e) {
    const Example& ex = batch.examples[e];
    const LossReport expect =
        loss_conditional<double>({ex.carrier, ex.carrier_phase}, ex.messages, model, cfg, true);
    CHECK(rr.samples.carrier[e] == doctest::Approx(expect.carrier_loss).epsilon(1e-12));
    CHECK(rr.samples.messages[1][e] ==
          doctest::Approx(expect.message_losses[1]).epsilon(1e-12));
  }
  CHECK(eval_csv(rr) == eval_csv(evaluate(model, bank, opt)));
  opt.seed = 5;
  CHECK(eval_csv(rr) != eval_csv(evaluate(model, bank, opt)));

  const std::string csv = eval_csv(rr);
  CHECK(csv.rfind("metric,k,regime,mean,std,p5,p95\n", 0) == 0);
  CHECK(csv.find("\nmessage_mse_wav_1,2,SFS,") != std::string::npos);

  opt.n_examples = 0;
  CHECK_THROWS_AS(evaluate(model, bank, opt), ConfigError);
  opt.n_examples = 2;
  const ModelBundle<double> wide = init_model<double>(reduced_spec(6), tiny_stft(), 5);
  CHECK_THROWS_AS(evaluate(wide, bank, opt), ConfigError);
}

TEST_CASE("residual_export: definition, images, audio") {
  TempDir dir("residual");
  Rng rng(3);
  const StftConfig cfg = tiny_stft();
  const Spectrum<double> c = stft<double>(oracle::noise_clip(rng, 200), cfg);
  MagSpec<double> c_hat = c.magnitude;
  for (Index i = 0; i < c_hat.values.size(); ++i) c_hat.values(i) += 0.1 * uniform(rng, 0.0, 1.0);

  const MagSpec<double> res = residual(c.magnitude, c_hat);
  CHECK((res.values.array() == (c.magnitude.values - c_hat.values).cwiseAbs().array()).all());
  CHECK(residual(c.magnitude, c.magnitude).values.isZero(0.0));
  CHECK_THROWS_AS(residual(c.magnitude, MagSpec<double>{Matrix<double>::Zero(3, 3), cfg}),
                  InvalidInput);

  const ResidualFiles same = residual_export(c.magnitude, c.magnitude, c.phase,
                                             dir.path(), "same");
  const Image zero_img = read_png(same.images[2]);
  CHECK(zero_img.width == c.magnitude.frames());
  CHECK(zero_img.height == c.magnitude.bins());
  const Image blank = spectrogram_image({Matrix<double>::Zero(2, 2), cfg});
  for (std::size_t p = 0; p < zero_img.rgb.size(); p += 3)
    CHECK(std::equal(zero_img.rgb.begin() + p, zero_img.rgb.begin() + p + 3, blank.rgb.begin()));
  CHECK(read_wav(same.audio).samples.isZero(0.0));

  const ResidualFiles files = residual_export(c.magnitude, c_hat, c.phase, dir.path(), "x");
  CHECK(files.images.size() == 3);
  CHECK(read_png(files.images[0]).rgb == spectrogram_image(c.magnitude, 80.0,
                                                           std::max(c.magnitude.values.maxCoeff(),
                                                                    c_hat.values.maxCoeff()))
                                             .rgb);
  // Residual audio: the signed difference with the carrier phase attached.
  ComplexMatrix<double> z(c.magnitude.bins(), c.magnitude.frames());
  const Matrix<double> d = c_hat.values - c.magnitude.values;
  z.real() = d.cwiseProduct(c.phase.values.array().cos().matrix());
  z.imag() = d.cwiseProduct(c.phase.values.array().sin().matrix());
  const AudioClip expect = quantize_pcm16(istft_complex<double>(z, cfg));
  CHECK((read_wav(files.audio).samples - expect.samples).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spectrogram_image: orientation and log mapping") {
  MagSpec<double> m{Matrix<double>::Zero(4, 3), tiny_stft()};
  m.values(3, 0) = 1.0;   // top-left pixel once the highest bin is on top
  m.values(0, 2) = 1e-2;  // -40 dB: half-way through an 80 dB range
  const Image img = spectrogram_image(m, 80.0);
  const auto px = [&](int x, int y) {
    return std::vector<int>(img.rgb.begin() + (y * img.width + x) * 3,
                            img.rgb.begin() + (y * img.width + x) * 3 + 3);
  };
  CHECK(px(0, 0) == std::vector<int>{252, 253, 191});
  CHECK(px(1, 1) == std::vector<int>{0, 0, 4});
  // u = 0.5 sits between the third and fourth anchors.
  CHECK(px(2, 3) == std::vector<int>{181, 57, 117});
}

TEST_CASE("export_abx_stimuli: counts, key audit, determinism") {
  TempDir corpus("abx_corpus");
  const ClipBank bank = toy_bank(corpus, 5, 0.3);
  const ModelBundle<double> model = init_model<double>(reduced_spec(1), tiny_stft(), 2);
  StimulusOptions opt;
  opt.n_triples = 6;
  opt.seed = 8;
  opt.seconds = 0.2;
  TempDir a("abx_a"), b("abx_b");
  const auto rows = export_abx_stimuli(model, bank, opt, a.path());
  export_abx_stimuli(model, bank, opt, b.path());
  REQUIRE(rows.size() == 6);
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(a / "stimuli")) {
    ++wavs;
    CHECK(slurp(e.path()) == slurp(b / "stimuli" / e.path().filename()));
  }
  CHECK(wavs == 18);
  CHECK(slurp(a / "key/abx_key.csv") == slurp(b / "key/abx_key.csv"));
  CHECK(read_abx_key(a / "key/abx_key.csv").size() == 6);
  CHECK(audit_abx_package(a.path(), bank).empty());
  bool both_orders = false;
  for (const auto& r : rows) both_orders = both_orders || r.a_role != rows[0].a_role;
  CHECK(both_orders);

  // Swapping X for the other file breaks the audit.
  const AbxKeyRow& r0 = rows[0];
  const char other = r0.x_matches == "A" ? 'B' : 'A';
  char name[64];
  std::snprintf(name, sizeof name, "triple_000_%c.wav", other);
  fs::copy_file(a / "stimuli" / name, a / "stimuli/triple_000_X.wav",
                fs::copy_options::overwrite_existing);
  CHECK(!audit_abx_package(a.path(), bank).empty());

  const ModelBundle<double> k5 = init_model<double>(reduced_spec(5), tiny_stft(), 2);
  TempDir c("abx_c");
  CHECK_THROWS_AS(export_abx_stimuli(k5, bank, opt, c.path()), ConfigError);
}
