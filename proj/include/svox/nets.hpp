// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Gated convolutional networks over spectrogram feature maps: carrier encoder,
// carrier decoder, message decoder(s) and the adversarial discriminator. Every
// forward pass can record a tape; the matching *_backward function consumes it
// and accumulates parameter gradients.

#pragma once

#include "svox/dense.hpp"
#include "svox/dsp.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace svox {

/// channels x (bins * frames); spatial index f + bins * t, matching the
/// column-major layout of a bins x frames spectrogram.
template <typename Scalar>
struct FeatureMap {
  RowMajorMatrix<Scalar> values;
  Index bins = 0;
  Index frames = 0;

  Index channels() const { return values.rows(); }
  Index pixels() const { return bins * frames; }

  Eigen::Map<Matrix<Scalar>> channel(Index c) {
    return {values.row(c).data(), bins, frames};
  }
  Eigen::Map<const Matrix<Scalar>> channel(Index c) const {
    return {values.row(c).data(), bins, frames};
  }

  static FeatureMap zeros(Index channels, Index bins, Index frames) {
    return {RowMajorMatrix<Scalar>::Zero(channels, bins * frames), bins, frames};
  }
  static FeatureMap stack(const std::vector<const Matrix<Scalar>*>& planes);
};

/// Named parameter arrays keyed by component path, e.g.
/// "encoder/block0/gate_weights". Ordered, so iteration is deterministic.
template <typename Scalar>
using ParameterSet = std::map<std::string, Matrix<Scalar>>;

struct GatedBlockConfig {
  int kernel_count = 64;
  int kernel_height = 3;
  int kernel_width = 3;
};

struct ArchitectureSpec {
  int kernel_count = 64;
  int encoder_blocks = 3;
  int carrier_decoder_blocks = 4;
  int message_decoder_blocks = 6;
  int discriminator_layers = 6;
  int k = 1;
  bool conditional = false;
  bool discriminator = false;

  /// Throws ConfigError on non-positive sizes or k < 1.
  void validate() const;
  int message_decoder_count() const { return conditional ? 1 : k; }
  /// Channels of h = [E_c(c); c; m_1..m_k].
  int encoded_channels() const { return kernel_count + 1 + k; }
  int message_decoder_inputs() const { return conditional ? 1 + k : 1; }

  bool operator==(const ArchitectureSpec&) const = default;
};

struct ParameterShape {
  std::string path;
  Index rows = 0;
  Index cols = 0;
  Index fan_in = 0;
  bool bias = false;
};

/// Every parameter array the spec implies, in initialisation order.
std::vector<ParameterShape> enumerate_parameters(const ArchitectureSpec& spec);

/// Component groups used for freezing.
enum class Component { encoder, carrier_decoder, message_decoder, discriminator };
Component component_of(const std::string& path);

template <typename Scalar>
struct ModelBundle {
  ArchitectureSpec spec;
  StftConfig stft;
  std::uint64_t rng_seed = 0;
  ParameterSet<Scalar> parameters;

  const Matrix<Scalar>& at(const std::string& path) const;
  bool all_finite() const;
};

/// Zero biases, uniform weights in +-sqrt(6 / fan_in). Bit-identical for
/// identical seeds.
template <typename Scalar>
ModelBundle<Scalar> init_model(const ArchitectureSpec& spec,
                               const StftConfig& stft, std::uint64_t seed);

template <typename To, typename From>
ModelBundle<To> cast_model(const ModelBundle<From>& model) {
  ModelBundle<To> out{model.spec, model.stft, model.rng_seed, {}};
  for (const auto& [path, value] : model.parameters)
    out.parameters.emplace(path, value.template cast<To>());
  return out;
}

/// Zero-filled gradient buffers for the given components.
template <typename Scalar>
ParameterSet<Scalar> zero_gradients(const ModelBundle<Scalar>& model);

struct ConditionCode {
  int index = 0;
  int k = 1;
  /// Throws ConfigError unless 0 <= index < k.
  std::vector<double> one_hot() const;
};

/// none (k = 1, plain decoder) | decoder index (multi) | code (conditional).
using MessageSelector = std::variant<std::monostate, int, ConditionCode>;

// ---------------------------------------------------------------- tapes

template <typename Scalar>
struct GatedBlockTape {
  FeatureMap<Scalar> input;
  RowMajorMatrix<Scalar> linear;
  RowMajorMatrix<Scalar> gate;  // sigmoid output
};

template <typename Scalar>
struct StackTape {
  std::vector<GatedBlockTape<Scalar>> blocks;
  FeatureMap<Scalar> output;
};

template <typename Scalar>
struct EncodeTape {
  StackTape<Scalar> encoder;
};

template <typename Scalar>
struct DecodeTape {
  StackTape<Scalar> stack;
  std::string prefix;
};

template <typename Scalar>
struct DiscriminatorTape {
  StackTape<Scalar> stack;
  Vector<Scalar> pooled;
  Scalar probability{};
};

// ---------------------------------------------------------------- layers

/// output = conv_A(x) * sigmoid(conv_B(x)); 3x3 kernels, zero "same" padding.
template <typename Scalar>
FeatureMap<Scalar> gated_block(const FeatureMap<Scalar>& input,
                               const ParameterSet<Scalar>& params,
                               const std::string& prefix,
                               GatedBlockTape<Scalar>* tape = nullptr);

/// Accumulates into `grads` (keys that are absent are skipped). Returns the
/// input gradient when `need_input_grad`, otherwise an empty map.
template <typename Scalar>
FeatureMap<Scalar> gated_block_backward(const GatedBlockTape<Scalar>& tape,
                                        const FeatureMap<Scalar>& grad_output,
                                        const ParameterSet<Scalar>& params,
                                        const std::string& prefix,
                                        ParameterSet<Scalar>* grads,
                                        bool need_input_grad = true);

// ---------------------------------------------------------------- networks

/// h = [E_c(c); c; m_1 .. m_k] along the channel axis.
template <typename Scalar>
FeatureMap<Scalar> encode(const Matrix<Scalar>& carrier,
                          const std::vector<Matrix<Scalar>>& messages,
                          const ModelBundle<Scalar>& model,
                          EncodeTape<Scalar>* tape = nullptr);

/// Backpropagates the E_c slice of dL/dh into encoder parameters.
template <typename Scalar>
void encode_backward(const EncodeTape<Scalar>& tape,
                     const FeatureMap<Scalar>& grad_h,
                     const ModelBundle<Scalar>& model,
                     ParameterSet<Scalar>* grads);

template <typename Scalar>
Matrix<Scalar> carrier_decode(const FeatureMap<Scalar>& h,
                              const ModelBundle<Scalar>& model,
                              DecodeTape<Scalar>* tape = nullptr);

template <typename Scalar>
FeatureMap<Scalar> carrier_decode_backward(const DecodeTape<Scalar>& tape,
                                           const Matrix<Scalar>& grad_output,
                                           const ModelBundle<Scalar>& model,
                                           ParameterSet<Scalar>* grads,
                                           bool need_input_grad = true);

/// The decoder's input planes for a selector: c_hat, plus k constant
/// one-hot planes in conditional mode.
template <typename Scalar>
FeatureMap<Scalar> message_decoder_input(const Matrix<Scalar>& c_hat,
                                         const ModelBundle<Scalar>& model,
                                         const MessageSelector& which);

template <typename Scalar>
Matrix<Scalar> message_decode(const Matrix<Scalar>& c_hat,
                              const ModelBundle<Scalar>& model,
                              const MessageSelector& which,
                              DecodeTape<Scalar>* tape = nullptr);

/// Returns dL/dc_hat when `need_input_grad`.
template <typename Scalar>
Matrix<Scalar> message_decode_backward(const DecodeTape<Scalar>& tape,
                                       const Matrix<Scalar>& grad_output,
                                       const ModelBundle<Scalar>& model,
                                       ParameterSet<Scalar>* grads,
                                       bool need_input_grad = true);

/// Probability in [0, 1] that `spec` is an original (non-stego) carrier.
template <typename Scalar>
Scalar discriminate(const Matrix<Scalar>& spec,
                    const ModelBundle<Scalar>& model,
                    DiscriminatorTape<Scalar>* tape = nullptr);

/// `grad_logit` is dL/d(pre-sigmoid logit). Returns dL/dspec when
/// `need_input_grad`.
template <typename Scalar>
Matrix<Scalar> discriminate_backward(const DiscriminatorTape<Scalar>& tape,
                                     Scalar grad_logit,
                                     const ModelBundle<Scalar>& model,
                                     ParameterSet<Scalar>* grads,
                                     bool need_input_grad = true);

}  // namespace svox
