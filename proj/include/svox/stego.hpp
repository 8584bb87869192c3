// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Hide/reveal on audio, the evaluation harness, residual images, and ABX
// stimulus packages.

#pragma once

#include "svox/corpus.hpp"
#include "svox/dsp.hpp"
#include "svox/nets.hpp"
#include "svox/trainloop.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace svox {

/// Longest carrier accepted by hide, in frames.
inline constexpr Index kMaxHideFrames = 200000;

/// Reverses bin order and frame order.
template <typename Scalar>
MagSpec<Scalar> flip_preprocess(const MagSpec<Scalar>& m);

struct StegoArtifacts {
  /// Same sample count as the carrier; already multiplied by peak_scale.
  AudioClip stego_wav;
  /// Gain applied to keep |samples| <= 1; 1 when no clipping was possible.
  double peak_scale = 1.0;
  MagSpec<double> carrier;
  PhaseSpec<double> carrier_phase;
  /// Carrier-decoder output clamped at zero, as synthesised.
  MagSpec<double> carrier_hat;
  /// Messages at the carrier's frame count, unflipped.
  std::vector<MagSpec<double>> messages;
};

/// Messages are cropped or zero-padded to the carrier's sample count.
/// Throws ConfigError on a k mismatch, InvalidInput on empty, overlong, or
/// wrong-rate audio.
template <typename Scalar>
StegoArtifacts hide(const AudioClip& carrier,
                    const std::vector<AudioClip>& messages,
                    const ModelBundle<Scalar>& model, bool flip = false);

struct RevealOptions {
  bool flip = false;
  /// 0 skips waveform synthesis; `message` is then empty.
  int gl_iterations = 50;
  std::uint64_t seed = 0;
  /// Multiplies the input first; pass 1 / peak_scale from hide.
  double input_gain = 1.0;
};

struct RevealResult {
  AudioClip message;
  /// Decoder output, unflipped and clamped at zero.
  MagSpec<double> magnitude;
  /// Share of the decoder output's energy in negative values, before clamping.
  double negative_energy = 0.0;
  /// Decoded energy relative to the input's, in dB.
  double relative_level_db = 0.0;
  /// Degenerate decoding: non-finite, mostly negative, or near silent. A
  /// plausible decoding of a carrier that holds no message is not flagged.
  bool low_confidence = false;
};

/// Throws ConfigError when `which` does not fit the decoder layout.
template <typename Scalar>
RevealResult reveal(const AudioClip& stego, const ModelBundle<Scalar>& model,
                    const MessageSelector& which,
                    const RevealOptions& options = {});

/// Selector of message i for the model's decoder layout.
MessageSelector message_selector(const ArchitectureSpec& spec, int i);

DecoderMode decoder_mode_of(const ArchitectureSpec& spec);

struct MetricSummary {
  double mean = 0.0;
  /// Population standard deviation.
  double std = 0.0;
  /// Linear-interpolation percentiles.
  double p5 = 0.0;
  double p95 = 0.0;
};

MetricSummary summarize(std::vector<double> values);

struct EvalOptions {
  int n_examples = 100;
  std::uint64_t seed = 0;
  int frames_per_example = 64;
  bool flip = false;
  /// Also run hide, 16-bit quantisation and reveal.
  bool post_wav = true;
  /// Metadata only.
  Regime regime = Regime::SFS;
};

/// Per-example loss terms; `wav` fields are empty when post_wav is off.
struct EvalSamples {
  std::vector<double> carrier;
  std::vector<std::vector<double>> messages;  // [i][example]
  std::vector<double> carrier_wav;
  std::vector<std::vector<double>> messages_wav;
};

struct EvalReport {
  Regime regime = Regime::SFS;
  int k = 1;
  DecoderMode decoder_mode = DecoderMode::single;
  int n_examples = 0;
  /// In memory, the message decoders reading STFT∘ISTFT(c_hat).
  MetricSummary carrier_mse;
  MetricSummary message_mse;  // per-example mean over messages
  std::vector<MetricSummary> message_mse_each;
  /// After hide, 16-bit PCM quantisation, and reveal.
  std::optional<MetricSummary> carrier_mse_wav;
  std::optional<MetricSummary> message_mse_wav;
  std::vector<MetricSummary> message_mse_wav_each;
  EvalSamples samples;
};

/// Seeded held-out pairings drawn without noise. Throws ConfigError when the
/// bank has fewer than k + 1 clips or n_examples < 1.
template <typename Scalar>
EvalReport evaluate(const ModelBundle<Scalar>& model, const ClipBank& bank,
                    const EvalOptions& options);

template <typename Scalar>
EvalReport evaluate(const ModelBundle<Scalar>& model,
                    const CorpusManifest& manifest, Split split,
                    const EvalOptions& options);

/// Rows metric,k,regime,mean,std,p5,p95.
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);
std::string eval_csv(const EvalReport& report);

/// |a - b| entrywise. Throws InvalidInput on a shape mismatch.
MagSpec<double> residual(const MagSpec<double>& a, const MagSpec<double>& b);

/// RGB rows, top row = highest bin.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

/// Log-magnitude colour map over `range_db` below `reference` (the
/// spectrogram maximum when unset). Zero maps to the lowest colour.
Image spectrogram_image(const MagSpec<double>& mag, double range_db = 80.0,
                        std::optional<double> reference = std::nullopt);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

struct ResidualFiles {
  std::vector<std::filesystem::path> images;
  std::filesystem::path audio;
};

/// Carrier, estimate, and residual images plus the residual waveform
/// ISTFT((c_hat - c) * exp(i * phase)), written under `dir` with `stem`.
ResidualFiles residual_export(const MagSpec<double>& reference,
                              const MagSpec<double>& estimate,
                              const PhaseSpec<double>& phase,
                              const std::filesystem::path& dir,
                              const std::string& stem);

/// residual_export of the carrier and of every revealed message.
template <typename Scalar>
std::vector<ResidualFiles> export_artifacts(const StegoArtifacts& artifacts,
                                            const ModelBundle<Scalar>& model,
                                            bool flip,
                                            const std::filesystem::path& dir);

struct StimulusOptions {
  int n_triples = 50;
  std::uint64_t seed = 0;
  double seconds = 3.0;
  bool flip = false;
};

struct AbxKeyRow {
  int triple_id = 0;
  std::string a_role;  // "original" or "stego"
  std::string b_role;
  std::string x_matches;  // "A" or "B"
};

/// stimuli/triple_NNN_{A,B,X}.wav, key/abx_key.csv, key/sources.csv.
/// Throws ConfigError when the bank has fewer than k + 1 clips.
template <typename Scalar>
std::vector<AbxKeyRow> export_abx_stimuli(const ModelBundle<Scalar>& model,
                                          const ClipBank& bank,
                                          const StimulusOptions& options,
                                          const std::filesystem::path& out_dir);

/// Re-reads a package and checks file counts, that X equals the file named by
/// the key, and that the "original" file is the quantised source crop.
/// Returns one line per problem; empty when the package is consistent.
std::vector<std::string> audit_abx_package(const std::filesystem::path& out_dir,
                                           const ClipBank& bank);

std::vector<AbxKeyRow> read_abx_key(const std::filesystem::path& path);

}  // namespace svox
