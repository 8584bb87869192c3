// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "doctest.h"
#include "oracles.hpp"

#include "svox/errors.hpp"
#include "svox/nets.hpp"

#include <set>

using namespace svox;

namespace {

StftConfig tiny_stft() {
  StftConfig cfg;
  cfg.fft_size = 32;
  cfg.hop = 8;
  cfg.window_length = 32;
  return cfg;
}

ArchitectureSpec reduced_spec(int k = 1, bool conditional = false,
                              bool discriminator = false) {
  ArchitectureSpec spec;
  spec.kernel_count = 2;
  spec.k = k;
  spec.conditional = conditional;
  spec.discriminator = discriminator;
  return spec;
}

Matrix<double> random_plane(Rng& rng, Index F, Index T, double lo = 0.0,
                            double hi = 1.0) {
  Matrix<double> m(F, T);
  for (Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, lo, hi);
  return m;
}

// Samples `count` coordinates across every array whose path starts with
// `prefix` and compares analytic and central-difference gradients.
double worst_parameter_error(ModelBundle<double>& model,
                             const ParameterSet<double>& grads,
                             const std::string& prefix,
                             const std::function<double()>& loss, Rng& rng,
                             int count, double eps = 1e-6) {
  std::vector<std::string> paths;
  for (const auto& [path, value] : model.parameters)
    if (path.rfind(prefix, 0) == 0) paths.push_back(path);
  REQUIRE(!paths.empty());
  double worst = 0.0;
  for (int n = 0; n < count; ++n) {
    const std::string& path = paths[uniform_index(rng, paths.size())];
    Matrix<double>& value = model.parameters.at(path);
    const Index i = static_cast<Index>(uniform_index(rng, value.size()));
    const double fd = oracle::central_difference(loss, value(i), eps);
    worst = std::max(worst,
                     oracle::relative_error(grads.at(path)(i), fd, 1e-7));
  }
  return worst;
}

}  // namespace

TEST_CASE("init_model: determinism, seeds, decoder groups, errors") {
  const auto a = init_model<double>(reduced_spec(3), tiny_stft(), 7);
  const auto b = init_model<double>(reduced_spec(3), tiny_stft(), 7);
  const auto c = init_model<double>(reduced_spec(3), tiny_stft(), 8);
  REQUIRE(a.parameters.size() == b.parameters.size());
  bool any_diff = false;
  for (const auto& [path, value] : a.parameters) {
    CHECK((value.array() == b.parameters.at(path).array()).all());
    if (!(value.array() == c.parameters.at(path).array()).all()) any_diff = true;
  }
  CHECK(any_diff);
  CHECK(a.all_finite());

  std::set<std::string> groups;
  for (const auto& [path, value] : a.parameters)
    if (component_of(path) == Component::message_decoder)
      groups.insert(path.substr(0, path.find('/', path.find('/') + 1)));
  CHECK(groups == std::set<std::string>{"message_decoder/0", "message_decoder/1",
                                        "message_decoder/2"});

  // Paths enumerate exactly what the spec implies, biases are zero.
  const auto shapes = enumerate_parameters(reduced_spec(3));
  CHECK(shapes.size() == a.parameters.size());
  for (const auto& s : shapes) {
    REQUIRE(a.parameters.count(s.path) == 1);
    CHECK(a.at(s.path).rows() == s.rows);
    CHECK(a.at(s.path).cols() == s.cols);
    if (s.bias) CHECK(a.at(s.path).isZero(0.0));
  }

  CHECK_THROWS_AS(init_model<double>(reduced_spec(0), tiny_stft(), 1),
                  ConfigError);
  const auto cond = init_model<double>(reduced_spec(3, true), tiny_stft(), 1);
  CHECK(cond.parameters.count("message_decoder/conditional/block0/gate_bias"));
  CHECK(cond.at("message_decoder/conditional/block0/linear_weights").cols() ==
        4 * 9);
}

TEST_CASE("gated_block: zeros, shape preservation, errors") {
  const auto model = init_model<double>(reduced_spec(), tiny_stft(), 3);
  const FeatureMap<double> zero = FeatureMap<double>::zeros(1, 6, 5);
  const FeatureMap<double> out =
      gated_block(zero, model.parameters, "encoder/block0");
  CHECK(out.values.isZero(0.0));

  Rng rng(4);
  for (Index F : {3, 7, 17})
    for (Index T : {3, 4, 11}) {
      const Matrix<double> x = random_plane(rng, F, T);
      const auto y = gated_block(FeatureMap<double>::stack({&x}),
                                 model.parameters, "encoder/block0");
      CHECK(y.channels() == 2);
      CHECK(y.bins == F);
      CHECK(y.frames == T);
    }
  CHECK_THROWS_AS(gated_block(FeatureMap<double>::zeros(3, 4, 4),
                              model.parameters, "encoder/block0"),
                  InvalidInput);
}

TEST_CASE("gated_block: matches a direct convolution and its gradients") {
  Rng rng(5);
  const Index cin = 2, cout = 3, F = 5, T = 4;
  ParameterSet<double> params;
  params["b/linear_weights"] = random_plane(rng, cout, cin * 9, -1, 1);
  params["b/gate_weights"] = random_plane(rng, cout, cin * 9, -1, 1);
  params["b/linear_bias"] = random_plane(rng, cout, 1, -1, 1);
  params["b/gate_bias"] = random_plane(rng, cout, 1, -1, 1);
  FeatureMap<double> x = FeatureMap<double>::zeros(cin, F, T);
  for (Index i = 0; i < x.values.size(); ++i)
    x.values(i) = uniform(rng, -1.0, 1.0);

  // Direct loop convolution oracle.
  auto conv = [&](const Matrix<double>& w, const Matrix<double>& b, Index o,
                  Index f, Index t) {
    double acc = b(o, 0);
    for (Index c = 0; c < cin; ++c)
      for (int df = -1; df <= 1; ++df)
        for (int dt = -1; dt <= 1; ++dt) {
          const Index ff = f + df, tt = t + dt;
          if (ff < 0 || ff >= F || tt < 0 || tt >= T) continue;
          acc += w(o, c * 9 + (df + 1) * 3 + (dt + 1)) * x.channel(c)(ff, tt);
        }
    return acc;
  };
  GatedBlockTape<double> tape;
  const auto y = gated_block(x, params, "b", &tape);
  for (Index o = 0; o < cout; ++o)
    for (Index t = 0; t < T; ++t)
      for (Index f = 0; f < F; ++f) {
        const double a = conv(params["b/linear_weights"], params["b/linear_bias"],
                              o, f, t);
        const double g = conv(params["b/gate_weights"], params["b/gate_bias"], o,
                              f, t);
        CHECK(y.channel(o)(f, t) ==
              doctest::Approx(a / (1.0 + std::exp(-g))).epsilon(1e-13));
      }

  FeatureMap<double> weights = FeatureMap<double>::zeros(cout, F, T);
  for (Index i = 0; i < weights.values.size(); ++i)
    weights.values(i) = uniform(rng, -1.0, 1.0);
  ParameterSet<double> grads;
  for (const auto& [p, v] : params) grads[p] = Matrix<double>::Zero(v.rows(), v.cols());
  const auto dx = gated_block_backward(tape, weights, params, "b", &grads);
  auto loss = [&]() {
    return gated_block(x, params, "b").values.cwiseProduct(weights.values).sum();
  };
  double worst = 0.0;
  for (auto& [path, value] : params)
    for (Index i = 0; i < value.size(); ++i) {
      const double fd = oracle::central_difference(loss, value(i), 1e-6);
      worst = std::max(worst, oracle::relative_error(grads[path](i), fd, 1e-7));
    }
  for (Index i = 0; i < x.values.size(); ++i) {
    const double fd = oracle::central_difference(loss, x.values(i), 1e-6);
    worst = std::max(worst, oracle::relative_error(dx.values(i), fd, 1e-7));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("encode: channel arithmetic and carrier copy") {
  ArchitectureSpec spec;  // 64 kernels
  spec.encoder_blocks = 1;
  spec.carrier_decoder_blocks = 1;
  spec.message_decoder_blocks = 1;
  Rng rng(6);
  for (int k : {1, 3, 5}) {
    spec.k = k;
    const auto model = init_model<float>(spec, tiny_stft(), 1);
    const Matrix<float> c = random_plane(rng, 5, 4).cast<float>();
    std::vector<Matrix<float>> msgs;
    for (int i = 0; i < k; ++i) msgs.push_back(random_plane(rng, 5, 4).cast<float>());
    const auto h = encode(c, msgs, model);
    CHECK(h.channels() == 64 + 1 + k);
    CHECK((h.channel(64).array() == c.array()).all());
    for (int i = 0; i < k; ++i)
      CHECK((h.channel(65 + i).array() == msgs[i].array()).all());
    const Matrix<float> c_hat = carrier_decode(h, model);
    CHECK(c_hat.rows() == 5);
    CHECK(c_hat.cols() == 4);
    CHECK(c_hat.allFinite());
  }
  spec.k = 1;
  const auto model = init_model<double>(spec, tiny_stft(), 1);
  const Matrix<double> c = random_plane(rng, 5, 4);
  CHECK_THROWS_AS(encode(c, {c, c}, model), ConfigError);
  CHECK_THROWS_AS(encode(c, {random_plane(rng, 5, 3)}, model), InvalidInput);
}

TEST_CASE("carrier path: gradient of the carrier error matches finite differences") {
  const auto spec = reduced_spec();
  auto model = init_model<double>(spec, tiny_stft(), 11);
  Rng rng(12);
  const Index F = 17, T = 8;
  const Matrix<double> c = random_plane(rng, F, T);
  const Matrix<double> m = random_plane(rng, F, T);

  auto loss = [&]() {
    const Matrix<double> c_hat = carrier_decode(encode(c, {m}, model), model);
    return (c - c_hat).squaredNorm();
  };
  EncodeTape<double> etape;
  DecodeTape<double> dtape;
  const auto h = encode(c, {m}, model, &etape);
  const Matrix<double> c_hat = carrier_decode(h, model, &dtape);
  ParameterSet<double> grads = zero_gradients(model);
  const auto dh =
      carrier_decode_backward<double>(dtape, 2.0 * (c_hat - c), model, &grads);
  encode_backward(etape, dh, model, &grads);

  CHECK(worst_parameter_error(model, grads, "carrier_decoder", loss, rng, 60) <
        1e-4);
  CHECK(worst_parameter_error(model, grads, "encoder", loss, rng, 40) < 1e-4);
  // Message decoders are not on this path.
  CHECK(grads.at("message_decoder/0/output/weights").isZero(0.0));
}

TEST_CASE("message_decode: selectors, conditional planes, disjoint decoders") {
  Rng rng(13);
  const Matrix<double> c_hat = random_plane(rng, 9, 6);

  const auto cond = init_model<double>(reduced_spec(3, true), tiny_stft(), 2);
  const auto x = message_decoder_input(c_hat, cond, ConditionCode{1, 3});
  REQUIRE(x.channels() == 4);
  CHECK((x.channel(0).array() == c_hat.array()).all());
  CHECK((x.channel(1).array() == 0.0).all());
  CHECK((x.channel(2).array() == 1.0).all());
  CHECK((x.channel(3).array() == 0.0).all());
  CHECK(message_decode(c_hat, cond, ConditionCode{2, 3}).rows() == 9);
  CHECK_THROWS_AS(message_decode(c_hat, cond, 1), ConfigError);
  CHECK_THROWS_AS(message_decode(c_hat, cond, ConditionCode{3, 3}), ConfigError);
  CHECK_THROWS_AS(message_decode(c_hat, cond, ConditionCode{0, 2}), ConfigError);

  auto multi = init_model<double>(reduced_spec(3), tiny_stft(), 2);
  const Matrix<double> before = message_decode(c_hat, multi, 1);
  multi.parameters.at("message_decoder/0/block2/linear_weights").array() += 0.5;
  multi.parameters.at("message_decoder/0/output/bias").array() += 0.5;
  const Matrix<double> after = message_decode(c_hat, multi, 1);
  CHECK((before.array() == after.array()).all());
  CHECK_THROWS_AS(message_decode(c_hat, multi, 3), ConfigError);
  CHECK_THROWS_AS(message_decode(c_hat, multi, std::monostate{}), ConfigError);
  CHECK_THROWS_AS(message_decode(c_hat, multi, ConditionCode{0, 3}), ConfigError);

  const auto plain = init_model<double>(reduced_spec(1), tiny_stft(), 2);
  const Matrix<double> m_hat = message_decode(c_hat, plain, std::monostate{});
  CHECK(m_hat.rows() == 9);
  CHECK(m_hat.cols() == 6);
}

TEST_CASE("message_decode: gradients for parameters and c_hat") {
  auto model = init_model<double>(reduced_spec(3, true), tiny_stft(), 21);
  Rng rng(22);
  Matrix<double> c_hat = random_plane(rng, 17, 8);
  const Matrix<double> target = random_plane(rng, 17, 8);
  const ConditionCode code{2, 3};
  auto loss = [&]() {
    return (message_decode(c_hat, model, code) - target).squaredNorm();
  };
  DecodeTape<double> tape;
  const Matrix<double> m_hat = message_decode(c_hat, model, code, &tape);
  ParameterSet<double> grads = zero_gradients(model);
  const Matrix<double> dc =
      message_decode_backward<double>(tape, 2.0 * (m_hat - target), model, &grads);
  CHECK(worst_parameter_error(model, grads, "message_decoder", loss, rng, 80) <
        1e-4);
  double worst = 0.0;
  for (int n = 0; n < 30; ++n) {
    const Index i = static_cast<Index>(uniform_index(rng, c_hat.size()));
    const double fd = oracle::central_difference(loss, c_hat(i), 1e-6);
    worst = std::max(worst, oracle::relative_error(dc(i), fd, 1e-7));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("discriminate: range, any frame count, gradients, absent head") {
  auto model = init_model<double>(reduced_spec(1, false, true), tiny_stft(), 31);
  Rng rng(32);
  for (Index T : {3, 8, 20}) {
    const double p = discriminate(random_plane(rng, 17, T, 0.0, 3.0), model);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // Global pooling: tiling a constant input along time leaves the interior
  // response unchanged, so a constant plane scores almost the same for any T.
  const double p8 = discriminate(Matrix<double>::Constant(17, 8, 0.3).eval(), model);
  const double p64 =
      discriminate(Matrix<double>::Constant(17, 64, 0.3).eval(), model);
  CHECK(std::abs(p8 - p64) < 0.05);

  Matrix<double> x = random_plane(rng, 17, 8);
  auto logit = [&]() {
    const double p = discriminate(x, model);
    return std::log(p / (1.0 - p));
  };
  DiscriminatorTape<double> tape;
  discriminate(x, model, &tape);
  ParameterSet<double> grads = zero_gradients(model);
  const Matrix<double> dx = discriminate_backward(tape, 1.0, model, &grads);
  CHECK(worst_parameter_error(model, grads, "discriminator", logit, rng, 80) <
        1e-4);
  double worst = 0.0;
  for (int n = 0; n < 30; ++n) {
    const Index i = static_cast<Index>(uniform_index(rng, x.size()));
    const double fd = oracle::central_difference(logit, x(i), 1e-6);
    worst = std::max(worst, oracle::relative_error(dx(i), fd, 1e-7));
  }
  CHECK(worst < 1e-4);

  const auto plain = init_model<double>(reduced_spec(), tiny_stft(), 31);
  CHECK_THROWS_AS(discriminate(x, plain), ConfigError);
}

TEST_CASE("cast_model round trips through float") {
  const auto d = init_model<double>(reduced_spec(2), tiny_stft(), 9);
  const auto f = init_model<float>(reduced_spec(2), tiny_stft(), 9);
  const auto df = cast_model<float>(d);
  for (const auto& [path, value] : f.parameters)
    CHECK((value.array() == df.parameters.at(path).array()).all());
}
