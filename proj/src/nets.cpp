// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/nets.hpp"

#include "svox/errors.hpp"
#include "svox/random.hpp"

#include <cmath>

namespace svox {

namespace {

constexpr Index kTaps = 9;  // 3x3

std::string block_prefix(const std::string& prefix, int b) {
  return prefix + "/block" + std::to_string(b);
}

std::string message_prefix(const ArchitectureSpec& spec, int i) {
  return spec.conditional ? std::string("message_decoder/conditional")
                          : "message_decoder/" + std::to_string(i);
}

void add_block_shapes(std::vector<ParameterShape>& out,
                      const std::string& prefix, int blocks, Index in_channels,
                      Index kernels) {
  for (int b = 0; b < blocks; ++b) {
    const Index cin = b == 0 ? in_channels : kernels;
    const std::string p = block_prefix(prefix, b);
    const Index fan_in = cin * kTaps;
    out.push_back({p + "/linear_weights", kernels, fan_in, fan_in, false});
    out.push_back({p + "/linear_bias", kernels, 1, fan_in, true});
    out.push_back({p + "/gate_weights", kernels, fan_in, fan_in, false});
    out.push_back({p + "/gate_bias", kernels, 1, fan_in, true});
  }
}

void add_projection_shapes(std::vector<ParameterShape>& out,
                           const std::string& prefix, Index kernels) {
  out.push_back({prefix + "/weights", 1, kernels, kernels, false});
  out.push_back({prefix + "/bias", 1, 1, kernels, true});
}

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// (channels * 9) x pixels patch matrix with zero "same" padding. Row
// c * 9 + (df + 1) * 3 + (dt + 1) holds input(c, f + df, t + dt).
template <typename S>
RowMajorMatrix<S> im2col(const FeatureMap<S>& x) {
  const Index F = x.bins, T = x.frames;
  RowMajorMatrix<S> cols = RowMajorMatrix<S>::Zero(x.channels() * kTaps, F * T);
  for (Index c = 0; c < x.channels(); ++c) {
    const S* in = x.values.row(c).data();
    for (int df = -1; df <= 1; ++df)
      for (int dt = -1; dt <= 1; ++dt) {
        S* out = cols.row(c * kTaps + (df + 1) * 3 + (dt + 1)).data();
        const Index t0 = std::max<Index>(0, -dt), t1 = std::min(T, T - dt);
        const Index f0 = std::max<Index>(0, -df), f1 = std::min(F, F - df);
        for (Index t = t0; t < t1; ++t)
          for (Index f = f0; f < f1; ++f)
            out[f + F * t] = in[(f + df) + F * (t + dt)];
      }
  }
  return cols;
}

template <typename S>
FeatureMap<S> col2im(const RowMajorMatrix<S>& cols, Index channels, Index F,
                     Index T) {
  FeatureMap<S> x = FeatureMap<S>::zeros(channels, F, T);
  for (Index c = 0; c < channels; ++c) {
    S* in = x.values.row(c).data();
    for (int df = -1; df <= 1; ++df)
      for (int dt = -1; dt <= 1; ++dt) {
        const S* out = cols.row(c * kTaps + (df + 1) * 3 + (dt + 1)).data();
        const Index t0 = std::max<Index>(0, -dt), t1 = std::min(T, T - dt);
        const Index f0 = std::max<Index>(0, -df), f1 = std::min(F, F - df);
        for (Index t = t0; t < t1; ++t)
          for (Index f = f0; f < f1; ++f)
            in[(f + df) + F * (t + dt)] += out[f + F * t];
      }
  }
  return x;
}

template <typename S>
const Matrix<S>& param(const ParameterSet<S>& params, const std::string& path) {
  const auto it = params.find(path);
  if (it == params.end()) throw ConfigError("missing parameter '" + path + "'");
  return it->second;
}

template <typename S, typename Derived>
void accumulate(ParameterSet<S>* grads, const std::string& path,
                const Eigen::MatrixBase<Derived>& value) {
  if (grads == nullptr) return;
  const auto it = grads->find(path);
  if (it != grads->end()) it->second += value;
}

template <typename S>
FeatureMap<S> run_stack(const FeatureMap<S>& input,
                        const ParameterSet<S>& params,
                        const std::string& prefix, int blocks,
                        StackTape<S>* tape) {
  FeatureMap<S> x = input;
  if (tape) tape->blocks.assign(static_cast<std::size_t>(blocks), {});
  for (int b = 0; b < blocks; ++b)
    x = gated_block(x, params, block_prefix(prefix, b),
                    tape ? &tape->blocks[static_cast<std::size_t>(b)] : nullptr);
  if (tape) tape->output = x;
  return x;
}

template <typename S>
FeatureMap<S> run_stack_backward(const StackTape<S>& tape,
                                 FeatureMap<S> grad,
                                 const ParameterSet<S>& params,
                                 const std::string& prefix,
                                 ParameterSet<S>* grads,
                                 bool need_input_grad) {
  for (int b = static_cast<int>(tape.blocks.size()) - 1; b >= 0; --b)
    grad = gated_block_backward(tape.blocks[static_cast<std::size_t>(b)], grad,
                                params, block_prefix(prefix, b), grads,
                                need_input_grad || b > 0);
  return grad;
}

// 1x1 projection of a feature map down to one F x T plane.
template <typename S>
Matrix<S> project(const FeatureMap<S>& x, const ParameterSet<S>& params,
                  const std::string& prefix) {
  const Matrix<S>& w = param(params, prefix + "/weights");
  const Matrix<S>& b = param(params, prefix + "/bias");
  if (w.cols() != x.channels())
    throw InvalidInput("projection '" + prefix + "' expects " +
                       std::to_string(w.cols()) + " channels, got " +
                       std::to_string(x.channels()));
  Eigen::Matrix<S, 1, Eigen::Dynamic> row = w * x.values;
  row.array() += b(0, 0);
  return Eigen::Map<const Matrix<S>>(row.data(), x.bins, x.frames);
}

template <typename S>
FeatureMap<S> project_backward(const FeatureMap<S>& x,
                               const Matrix<S>& grad_output,
                               const ParameterSet<S>& params,
                               const std::string& prefix,
                               ParameterSet<S>* grads) {
  const Matrix<S>& w = param(params, prefix + "/weights");
  const Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> g(
      grad_output.data(), grad_output.size());
  accumulate(grads, prefix + "/weights", (g * x.values.transpose()).eval());
  accumulate(grads, prefix + "/bias", Matrix<S>::Constant(1, 1, g.sum()));
  FeatureMap<S> dx{RowMajorMatrix<S>(w.transpose() * g), x.bins, x.frames};
  return dx;
}

void check_plane(Index rows, Index cols, Index F, Index T, const char* what) {
  if (rows != F || cols != T)
    throw InvalidInput(std::string(what) + " shape " + std::to_string(rows) +
                       "x" + std::to_string(cols) + " does not match " +
                       std::to_string(F) + "x" + std::to_string(T));
}

}  // namespace

template <typename S>
FeatureMap<S> FeatureMap<S>::stack(const std::vector<const Matrix<S>*>& planes) {
  if (planes.empty()) throw InvalidInput("cannot stack zero planes");
  const Index F = planes.front()->rows(), T = planes.front()->cols();
  FeatureMap out = zeros(static_cast<Index>(planes.size()), F, T);
  for (std::size_t c = 0; c < planes.size(); ++c) {
    check_plane(planes[c]->rows(), planes[c]->cols(), F, T, "plane");
    out.channel(static_cast<Index>(c)) = *planes[c];
  }
  return out;
}

void ArchitectureSpec::validate() const {
  if (kernel_count < 1) throw ConfigError("kernel_count must be >= 1");
  if (encoder_blocks < 1 || carrier_decoder_blocks < 1 ||
      message_decoder_blocks < 1)
    throw ConfigError("block counts must be >= 1");
  if (discriminator && discriminator_layers < 1)
    throw ConfigError("discriminator_layers must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1, got " + std::to_string(k));
}

std::vector<ParameterShape> enumerate_parameters(const ArchitectureSpec& spec) {
  spec.validate();
  const Index K = spec.kernel_count;
  std::vector<ParameterShape> out;
  add_block_shapes(out, "encoder", spec.encoder_blocks, 1, K);
  add_block_shapes(out, "carrier_decoder", spec.carrier_decoder_blocks,
                   spec.encoded_channels(), K);
  add_projection_shapes(out, "carrier_decoder/output", K);
  for (int i = 0; i < spec.message_decoder_count(); ++i) {
    const std::string p = message_prefix(spec, i);
    add_block_shapes(out, p, spec.message_decoder_blocks,
                     spec.message_decoder_inputs(), K);
    add_projection_shapes(out, p + "/output", K);
  }
  if (spec.discriminator) {
    add_block_shapes(out, "discriminator", spec.discriminator_layers, 1, K);
    add_projection_shapes(out, "discriminator/head", K);
  }
  return out;
}

Component component_of(const std::string& path) {
  const std::string head = path.substr(0, path.find('/'));
  if (head == "encoder") return Component::encoder;
  if (head == "carrier_decoder") return Component::carrier_decoder;
  if (head == "message_decoder") return Component::message_decoder;
  if (head == "discriminator") return Component::discriminator;
  throw ConfigError("unknown component in path '" + path + "'");
}

std::vector<double> ConditionCode::one_hot() const {
  if (k < 1 || index < 0 || index >= k)
    throw ConfigError("condition index " + std::to_string(index) +
                      " out of range for k = " + std::to_string(k));
  std::vector<double> v(static_cast<std::size_t>(k), 0.0);
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

template <typename S>
const Matrix<S>& ModelBundle<S>::at(const std::string& path) const {
  return param(parameters, path);
}

template <typename S>
bool ModelBundle<S>::all_finite() const {
  for (const auto& [path, value] : parameters)
    if (!value.allFinite()) return false;
  return true;
}

template <typename S>
ModelBundle<S> init_model(const ArchitectureSpec& spec, const StftConfig& stft,
                          std::uint64_t seed) {
  spec.validate();
  stft.validate();
  ModelBundle<S> model{spec, stft, seed, {}};
  Rng rng(mix_seed(seed, 0x6e657473));
  for (const ParameterShape& shape : enumerate_parameters(spec)) {
    Matrix<S> value = Matrix<S>::Zero(shape.rows, shape.cols);
    if (!shape.bias) {
      const double bound = std::sqrt(6.0 / static_cast<double>(shape.fan_in));
      for (Index j = 0; j < value.cols(); ++j)
        for (Index i = 0; i < value.rows(); ++i)
          value(i, j) = static_cast<S>(uniform(rng, -bound, bound));
    }
    model.parameters.emplace(shape.path, std::move(value));
  }
  return model;
}

template <typename S>
ParameterSet<S> zero_gradients(const ModelBundle<S>& model) {
  ParameterSet<S> grads;
  for (const auto& [path, value] : model.parameters)
    grads.emplace(path, Matrix<S>::Zero(value.rows(), value.cols()));
  return grads;
}

template <typename S>
FeatureMap<S> gated_block(const FeatureMap<S>& input,
                          const ParameterSet<S>& params,
                          const std::string& prefix, GatedBlockTape<S>* tape) {
  const Matrix<S>& wa = param(params, prefix + "/linear_weights");
  const Matrix<S>& ba = param(params, prefix + "/linear_bias");
  const Matrix<S>& wb = param(params, prefix + "/gate_weights");
  const Matrix<S>& bb = param(params, prefix + "/gate_bias");
  if (wa.cols() != input.channels() * kTaps || wb.cols() != wa.cols() ||
      input.values.cols() != input.pixels())
    throw InvalidInput("gated block '" + prefix + "' expects " +
                       std::to_string(wa.cols() / kTaps) + " input channels, got " +
                       std::to_string(input.channels()));
  const RowMajorMatrix<S> cols = im2col(input);
  RowMajorMatrix<S> a = wa * cols;
  RowMajorMatrix<S> g = wb * cols;
  a.colwise() += ba.col(0);
  g.colwise() += bb.col(0);
  g = g.unaryExpr([](S v) { return sigmoid(v); });
  FeatureMap<S> out{a.cwiseProduct(g), input.bins, input.frames};
  if (tape) {
    tape->input = input;
    tape->linear = std::move(a);
    tape->gate = std::move(g);
  }
  return out;
}

template <typename S>
FeatureMap<S> gated_block_backward(const GatedBlockTape<S>& tape,
                                   const FeatureMap<S>& grad_output,
                                   const ParameterSet<S>& params,
                                   const std::string& prefix,
                                   ParameterSet<S>* grads,
                                   bool need_input_grad) {
  const RowMajorMatrix<S>& a = tape.linear;
  const RowMajorMatrix<S>& g = tape.gate;
  if (grad_output.values.rows() != a.rows() ||
      grad_output.values.cols() != a.cols())
    throw InvalidInput("gated block '" + prefix + "' gradient shape mismatch");
  const RowMajorMatrix<S> da = grad_output.values.cwiseProduct(g);
  const RowMajorMatrix<S> db = grad_output.values.cwiseProduct(a).cwiseProduct(
      g.cwiseProduct((RowMajorMatrix<S>::Ones(g.rows(), g.cols()) - g)));
  const RowMajorMatrix<S> cols = im2col(tape.input);
  accumulate(grads, prefix + "/linear_weights",
             Matrix<S>(da * cols.transpose()));
  accumulate(grads, prefix + "/linear_bias", Matrix<S>(da.rowwise().sum()));
  accumulate(grads, prefix + "/gate_weights", Matrix<S>(db * cols.transpose()));
  accumulate(grads, prefix + "/gate_bias", Matrix<S>(db.rowwise().sum()));
  if (!need_input_grad) return {};
  const RowMajorMatrix<S> dcols =
      param(params, prefix + "/linear_weights").transpose() * da +
      param(params, prefix + "/gate_weights").transpose() * db;
  return col2im(dcols, tape.input.channels(), tape.input.bins,
                tape.input.frames);
}

template <typename S>
FeatureMap<S> encode(const Matrix<S>& carrier,
                     const std::vector<Matrix<S>>& messages,
                     const ModelBundle<S>& model, EncodeTape<S>* tape) {
  const ArchitectureSpec& spec = model.spec;
  if (static_cast<int>(messages.size()) != spec.k)
    throw ConfigError("model expects k = " + std::to_string(spec.k) +
                      " messages, got " + std::to_string(messages.size()));
  if (carrier.size() == 0) throw InvalidInput("empty carrier spectrogram");
  const Index F = carrier.rows(), T = carrier.cols();
  for (const Matrix<S>& m : messages)
    check_plane(m.rows(), m.cols(), F, T, "message");

  const FeatureMap<S> c_map = FeatureMap<S>::stack({&carrier});
  const FeatureMap<S> e =
      run_stack(c_map, model.parameters, "encoder", spec.encoder_blocks,
                tape ? &tape->encoder : nullptr);
  FeatureMap<S> h = FeatureMap<S>::zeros(spec.encoded_channels(), F, T);
  h.values.topRows(spec.kernel_count) = e.values;
  h.channel(spec.kernel_count) = carrier;
  for (int i = 0; i < spec.k; ++i)
    h.channel(spec.kernel_count + 1 + i) = messages[static_cast<std::size_t>(i)];
  return h;
}

template <typename S>
void encode_backward(const EncodeTape<S>& tape, const FeatureMap<S>& grad_h,
                     const ModelBundle<S>& model, ParameterSet<S>* grads) {
  const Index K = model.spec.kernel_count;
  FeatureMap<S> g{grad_h.values.topRows(K), grad_h.bins, grad_h.frames};
  run_stack_backward(tape.encoder, std::move(g), model.parameters, "encoder",
                     grads, false);
}

template <typename S>
Matrix<S> carrier_decode(const FeatureMap<S>& h, const ModelBundle<S>& model,
                         DecodeTape<S>* tape) {
  if (h.channels() != model.spec.encoded_channels())
    throw InvalidInput("carrier decoder expects " +
                       std::to_string(model.spec.encoded_channels()) +
                       " channels, got " + std::to_string(h.channels()));
  const std::string prefix = "carrier_decoder";
  if (tape) tape->prefix = prefix;
  const FeatureMap<S> x =
      run_stack(h, model.parameters, prefix, model.spec.carrier_decoder_blocks,
                tape ? &tape->stack : nullptr);
  return project(x, model.parameters, prefix + "/output");
}

template <typename S>
FeatureMap<S> carrier_decode_backward(const DecodeTape<S>& tape,
                                      const Matrix<S>& grad_output,
                                      const ModelBundle<S>& model,
                                      ParameterSet<S>* grads,
                                      bool need_input_grad) {
  FeatureMap<S> g = project_backward(tape.stack.output, grad_output,
                                     model.parameters, tape.prefix + "/output",
                                     grads);
  return run_stack_backward(tape.stack, std::move(g), model.parameters,
                            tape.prefix, grads, need_input_grad);
}

namespace {

// Resolves a selector to (decoder index, optional one-hot code).
std::pair<int, std::vector<double>> resolve_selector(
    const ArchitectureSpec& spec, const MessageSelector& which) {
  if (spec.conditional) {
    const auto* code = std::get_if<ConditionCode>(&which);
    if (code == nullptr)
      throw ConfigError("conditional decoder requires a condition code");
    if (code->k != spec.k)
      throw ConfigError("condition code k = " + std::to_string(code->k) +
                        " does not match model k = " + std::to_string(spec.k));
    return {0, code->one_hot()};
  }
  if (std::holds_alternative<ConditionCode>(which))
    throw ConfigError("condition code given to a non-conditional model");
  if (std::holds_alternative<std::monostate>(which)) {
    if (spec.k != 1)
      throw ConfigError("model has " + std::to_string(spec.k) +
                        " message decoders; a decoder index is required");
    return {0, {}};
  }
  const int i = std::get<int>(which);
  if (i < 0 || i >= spec.k)
    throw ConfigError("decoder index " + std::to_string(i) +
                      " out of range for k = " + std::to_string(spec.k));
  return {i, {}};
}

}  // namespace

template <typename S>
FeatureMap<S> message_decoder_input(const Matrix<S>& c_hat,
                                    const ModelBundle<S>& model,
                                    const MessageSelector& which) {
  const auto [index, code] = resolve_selector(model.spec, which);
  (void)index;
  FeatureMap<S> x = FeatureMap<S>::zeros(1 + static_cast<Index>(code.size()),
                                         c_hat.rows(), c_hat.cols());
  x.channel(0) = c_hat;
  for (std::size_t j = 0; j < code.size(); ++j)
    x.values.row(1 + static_cast<Index>(j)).setConstant(static_cast<S>(code[j]));
  return x;
}

template <typename S>
Matrix<S> message_decode(const Matrix<S>& c_hat, const ModelBundle<S>& model,
                         const MessageSelector& which, DecodeTape<S>* tape) {
  if (c_hat.size() == 0) throw InvalidInput("empty spectrogram");
  const int index = resolve_selector(model.spec, which).first;
  const std::string prefix = message_prefix(model.spec, index);
  if (tape) tape->prefix = prefix;
  const FeatureMap<S> x = run_stack(message_decoder_input(c_hat, model, which),
                                    model.parameters, prefix,
                                    model.spec.message_decoder_blocks,
                                    tape ? &tape->stack : nullptr);
  return project(x, model.parameters, prefix + "/output");
}

template <typename S>
Matrix<S> message_decode_backward(const DecodeTape<S>& tape,
                                  const Matrix<S>& grad_output,
                                  const ModelBundle<S>& model,
                                  ParameterSet<S>* grads,
                                  bool need_input_grad) {
  FeatureMap<S> g = project_backward(tape.stack.output, grad_output,
                                     model.parameters, tape.prefix + "/output",
                                     grads);
  const FeatureMap<S> dx = run_stack_backward(
      tape.stack, std::move(g), model.parameters, tape.prefix, grads,
      need_input_grad);
  if (!need_input_grad) return {};
  return dx.channel(0);
}

template <typename S>
S discriminate(const Matrix<S>& spec, const ModelBundle<S>& model,
               DiscriminatorTape<S>* tape) {
  if (!model.spec.discriminator ||
      model.parameters.count("discriminator/head/weights") == 0)
    throw ConfigError("model has no discriminator");
  if (spec.size() == 0) throw InvalidInput("empty spectrogram");
  const FeatureMap<S> x = run_stack(FeatureMap<S>::stack({&spec}),
                                    model.parameters, "discriminator",
                                    model.spec.discriminator_layers,
                                    tape ? &tape->stack : nullptr);
  const Vector<S> pooled = x.values.rowwise().mean();
  const S logit = (model.at("discriminator/head/weights") * pooled)(0, 0) +
                  model.at("discriminator/head/bias")(0, 0);
  const S p = sigmoid(logit);
  if (tape) {
    tape->pooled = pooled;
    tape->probability = p;
  }
  return p;
}

template <typename S>
Matrix<S> discriminate_backward(const DiscriminatorTape<S>& tape, S grad_logit,
                                const ModelBundle<S>& model,
                                ParameterSet<S>* grads, bool need_input_grad) {
  const Matrix<S>& w = model.at("discriminator/head/weights");
  accumulate(grads, "discriminator/head/weights",
             Matrix<S>(grad_logit * tape.pooled.transpose()));
  accumulate(grads, "discriminator/head/bias",
             Matrix<S>::Constant(1, 1, grad_logit));
  const FeatureMap<S>& out = tape.stack.output;
  const Vector<S> dpooled =
      (w.transpose() * grad_logit) / static_cast<S>(out.pixels());
  FeatureMap<S> g{RowMajorMatrix<S>(dpooled.replicate(1, out.pixels())),
                  out.bins, out.frames};
  const FeatureMap<S> dx =
      run_stack_backward(tape.stack, std::move(g), model.parameters,
                         "discriminator", grads, need_input_grad);
  if (!need_input_grad) return {};
  return dx.channel(0);
}

#define SVOX_INSTANTIATE_NETS(S)                                               \
  template struct FeatureMap<S>;                                               \
  template struct ModelBundle<S>;                                              \
  template ModelBundle<S> init_model<S>(const ArchitectureSpec&,               \
                                        const StftConfig&, std::uint64_t);     \
  template ParameterSet<S> zero_gradients<S>(const ModelBundle<S>&);           \
  template FeatureMap<S> gated_block<S>(const FeatureMap<S>&,                  \
                                        const ParameterSet<S>&,                \
                                        const std::string&,                    \
                                        GatedBlockTape<S>*);                   \
  template FeatureMap<S> gated_block_backward<S>(                              \
      const GatedBlockTape<S>&, const FeatureMap<S>&, const ParameterSet<S>&,  \
      const std::string&, ParameterSet<S>*, bool);                             \
  template FeatureMap<S> encode<S>(const Matrix<S>&,                           \
                                   const std::vector<Matrix<S>>&,              \
                                   const ModelBundle<S>&, EncodeTape<S>*);     \
  template void encode_backward<S>(const EncodeTape<S>&, const FeatureMap<S>&, \
                                   const ModelBundle<S>&, ParameterSet<S>*);   \
  template Matrix<S> carrier_decode<S>(const FeatureMap<S>&,                   \
                                       const ModelBundle<S>&, DecodeTape<S>*); \
  template FeatureMap<S> carrier_decode_backward<S>(                           \
      const DecodeTape<S>&, const Matrix<S>&, const ModelBundle<S>&,           \
      ParameterSet<S>*, bool);                                                 \
  template FeatureMap<S> message_decoder_input<S>(                             \
      const Matrix<S>&, const ModelBundle<S>&, const MessageSelector&);        \
  template Matrix<S> message_decode<S>(const Matrix<S>&,                       \
                                       const ModelBundle<S>&,                  \
                                       const MessageSelector&,                 \
                                       DecodeTape<S>*);                        \
  template Matrix<S> message_decode_backward<S>(                               \
      const DecodeTape<S>&, const Matrix<S>&, const ModelBundle<S>&,           \
      ParameterSet<S>*, bool);                                                 \
  template S discriminate<S>(const Matrix<S>&, const ModelBundle<S>&,          \
                             DiscriminatorTape<S>*);                           \
  template Matrix<S> discriminate_backward<S>(const DiscriminatorTape<S>&, S,  \
                                              const ModelBundle<S>&,           \
                                              ParameterSet<S>*, bool);

SVOX_INSTANTIATE_NETS(float)
SVOX_INSTANTIATE_NETS(double)

}  // namespace svox
