// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/stego.hpp"

#include "svox/errors.hpp"
#include "svox/random.hpp"
#include "svox/wav.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace svox {

namespace fs = std::filesystem;

template <typename S>
MagSpec<S> flip_preprocess(const MagSpec<S>& m) {
  return {m.values.reverse(), m.config};
}

namespace {

constexpr double kPeak = 32767.0 / 32768.0;

template <typename S>
std::vector<Matrix<S>> cast_all(const std::vector<MagSpec<double>>& specs,
                                bool flip) {
  std::vector<Matrix<S>> out;
  for (const auto& m : specs)
    out.push_back((flip ? flip_preprocess(m) : m).values.template cast<S>());
  return out;
}

void check_audio(const AudioClip& clip, const StftConfig& cfg,
                 const std::string& what) {
  if (clip.empty()) throw InvalidInput(what + " is empty");
  if (clip.sample_rate != cfg.sample_rate)
    throw InvalidInput(what + " is " + std::to_string(clip.sample_rate) +
                       " Hz; the model expects " +
                       std::to_string(cfg.sample_rate));
  if (!clip.samples.allFinite()) throw InvalidInput(what + " is not finite");
}

AudioClip fit_length(const AudioClip& clip, Index length) {
  AudioClip out{Vector<double>::Zero(length), clip.sample_rate};
  const Index n = std::min(length, clip.size());
  out.samples.head(n) = clip.samples.head(n);
  return out;
}

}  // namespace

template <typename S>
StegoArtifacts hide(const AudioClip& carrier,
                    const std::vector<AudioClip>& messages,
                    const ModelBundle<S>& model, bool flip) {
  const StftConfig& cfg = model.stft;
  if (static_cast<int>(messages.size()) != model.spec.k)
    throw ConfigError("model hides k = " + std::to_string(model.spec.k) +
                      " messages, got " + std::to_string(messages.size()));
  check_audio(carrier, cfg, "carrier");
  const Index length = carrier.size();
  if (cfg.frames_for(length) > kMaxHideFrames)
    throw InvalidInput("carrier longer than " + std::to_string(kMaxHideFrames) +
                       " frames");
  if (length <= cfg.padding())
    throw InvalidInput("carrier shorter than half a window");

  StegoArtifacts out;
  Spectrum<double> c = stft<double>(carrier, cfg);
  out.carrier = std::move(c.magnitude);
  out.carrier_phase = std::move(c.phase);
  for (std::size_t i = 0; i < messages.size(); ++i) {
    check_audio(messages[i], cfg, "message " + std::to_string(i));
    out.messages.push_back(
        stft<double>(fit_length(messages[i], length), cfg).magnitude);
  }

  const Matrix<S> c_hat =
      carrier_decode(encode<S>(out.carrier.values.template cast<S>(),
                               cast_all<S>(out.messages, flip), model),
                     model);
  out.carrier_hat = {c_hat.template cast<double>().cwiseMax(0.0), cfg};
  out.stego_wav = istft(out.carrier_hat, out.carrier_phase, length);
  const double peak = out.stego_wav.samples.cwiseAbs().maxCoeff();
  if (peak > kPeak) {
    out.peak_scale = kPeak / peak;
    out.stego_wav.samples *= out.peak_scale;
  }
  return out;
}

MessageSelector message_selector(const ArchitectureSpec& spec, int i) {
  if (spec.conditional) return ConditionCode{i, spec.k};
  if (spec.k == 1) return std::monostate{};
  return i;
}

DecoderMode decoder_mode_of(const ArchitectureSpec& spec) {
  if (spec.conditional) return DecoderMode::conditional;
  return spec.k == 1 ? DecoderMode::single : DecoderMode::multi;
}

namespace {

// Thresholds for the reveal confidence flag. Trained decoders put under 2% of
// their output energy below zero on real speech.
constexpr double kMaxNegativeEnergy = 0.2;
constexpr double kMinRelativeLevelDb = -30.0;

double energy_db(const Matrix<double>& m) {
  return 10.0 * std::log10(m.squaredNorm() / static_cast<double>(m.size()) +
                           1e-30);
}

}  // namespace

template <typename S>
RevealResult reveal(const AudioClip& stego, const ModelBundle<S>& model,
                    const MessageSelector& which, const RevealOptions& options) {
  const StftConfig& cfg = model.stft;
  check_audio(stego, cfg, "stego input");
  AudioClip input = stego;
  input.samples *= options.input_gain;
  const MagSpec<double> mag = stft<double>(input, cfg).magnitude;
  Matrix<double> raw =
      message_decode<S>(mag.values.template cast<S>(), model, which)
          .template cast<double>();
  if (options.flip) raw = raw.reverse().eval();

  RevealResult out;
  const double energy = raw.squaredNorm();
  out.negative_energy =
      energy > 0.0 ? raw.cwiseMin(0.0).squaredNorm() / energy : 0.0;
  out.magnitude = {raw.cwiseMax(0.0), cfg};
  out.relative_level_db = energy_db(out.magnitude.values) - energy_db(mag.values);
  out.low_confidence = !raw.allFinite() ||
                       out.negative_energy > kMaxNegativeEnergy ||
                       out.relative_level_db < kMinRelativeLevelDb;
  if (options.gl_iterations > 0)
    out.message = griffin_lim(out.magnitude, options.gl_iterations,
                              options.seed, stego.size())
                      .clip;
  return out;
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (const double v : values) s.mean += v;
  s.mean /= n;
  for (const double v : values) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / n);
  std::sort(values.begin(), values.end());
  auto pct = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.p5 = pct(0.05);
  s.p95 = pct(0.95);
  return s;
}

namespace {

template <typename S>
LossReport example_loss(const Example& ex, const ModelBundle<S>& model,
                        const TrainConfig& cfg, bool flip) {
  const Spectrum<S> c{{ex.carrier.values.template cast<S>(), ex.carrier.config},
                      {ex.carrier_phase.values.template cast<S>(),
                       ex.carrier_phase.config}};
  std::vector<MagSpec<S>> msgs;
  for (const auto& m : ex.messages)
    msgs.push_back({(flip ? flip_preprocess(m) : m).values.template cast<S>(),
                    m.config});
  switch (cfg.decoder_mode) {
    case DecoderMode::single:
      return loss_single(c, msgs[0], model, cfg, true);
    case DecoderMode::multi:
      return loss_multi(c, msgs, model, cfg, true);
    case DecoderMode::conditional:
      return loss_conditional(c, msgs, model, cfg, true);
  }
  throw ConfigError("unknown decoder mode");
}

std::size_t index_of(const ClipBank& bank, const std::string& path) {
  const auto it = std::find(bank.paths.begin(), bank.paths.end(), path);
  if (it == bank.paths.end()) throw InvalidInput("unknown clip " + path);
  return static_cast<std::size_t>(it - bank.paths.begin());
}

double mean_of(const std::vector<std::vector<double>>& per_message,
               std::size_t e) {
  double s = 0.0;
  for (const auto& m : per_message) s += m[e];
  return s / static_cast<double>(per_message.size());
}

}  // namespace

template <typename S>
EvalReport evaluate(const ModelBundle<S>& model, const ClipBank& bank,
                    const EvalOptions& options) {
  if (options.n_examples < 1) throw ConfigError("n_examples must be >= 1");
  const int k = model.spec.k;
  TrainConfig cfg;
  cfg.k = k;
  cfg.decoder_mode = decoder_mode_of(model.spec);

  BatchRequest request;
  request.k = k;
  request.frames_per_example = options.frames_per_example;
  request.batch_size = options.n_examples;
  request.noise_coeff = 0.0;
  request.stft = model.stft;
  Rng rng(options.seed);
  const ExampleBatch batch = sample_batch(bank, request, nullptr, rng);
  const Index length = model.stft.samples_for(options.frames_per_example);

  EvalReport report;
  report.regime = options.regime;
  report.k = k;
  report.decoder_mode = cfg.decoder_mode;
  report.n_examples = options.n_examples;
  EvalSamples& s = report.samples;
  s.messages.resize(static_cast<std::size_t>(k));
  if (options.post_wav) s.messages_wav.resize(static_cast<std::size_t>(k));

  for (const Example& ex : batch.examples) {
    const LossReport r = example_loss(ex, model, cfg, options.flip);
    s.carrier.push_back(r.carrier_loss);
    for (int i = 0; i < k; ++i)
      s.messages[static_cast<std::size_t>(i)].push_back(
          r.message_losses[static_cast<std::size_t>(i)]);
    if (!options.post_wav) continue;

    const AudioClip carrier = crop(
        bank.clips[index_of(bank, ex.carrier_source.path)],
        ex.carrier_source.offset, length);
    std::vector<AudioClip> messages;
    for (const auto& src : ex.message_sources)
      messages.push_back(
          crop(bank.clips[index_of(bank, src.path)], src.offset, length));
    const StegoArtifacts art = hide(carrier, messages, model, options.flip);
    const AudioClip wav = quantize_pcm16(art.stego_wav);
    s.carrier_wav.push_back(
        mse<double>(ex.carrier.values, stft<double>(wav, model.stft).magnitude.values));
    RevealOptions ro;
    ro.flip = options.flip;
    ro.gl_iterations = 0;
    ro.input_gain = 1.0 / art.peak_scale;
    for (int i = 0; i < k; ++i) {
      const RevealResult rv =
          reveal(wav, model, message_selector(model.spec, i), ro);
      s.messages_wav[static_cast<std::size_t>(i)].push_back(mse<double>(
          ex.messages[static_cast<std::size_t>(i)].values, rv.magnitude.values));
    }
  }

  std::vector<double> mean_msg, mean_msg_wav;
  for (std::size_t e = 0; e < batch.examples.size(); ++e) {
    mean_msg.push_back(mean_of(s.messages, e));
    if (options.post_wav) mean_msg_wav.push_back(mean_of(s.messages_wav, e));
  }
  report.carrier_mse = summarize(s.carrier);
  report.message_mse = summarize(mean_msg);
  for (const auto& m : s.messages) report.message_mse_each.push_back(summarize(m));
  if (options.post_wav) {
    report.carrier_mse_wav = summarize(s.carrier_wav);
    report.message_mse_wav = summarize(mean_msg_wav);
    for (const auto& m : s.messages_wav)
      report.message_mse_wav_each.push_back(summarize(m));
  }
  return report;
}

template <typename S>
EvalReport evaluate(const ModelBundle<S>& model, const CorpusManifest& manifest,
                    Split split, const EvalOptions& options) {
  const ClipBank bank = load_clips(manifest, split);
  if (bank.empty())
    throw ConfigError("split '" + to_string(split) + "' has no clips");
  return evaluate(model, bank, options);
}

std::string eval_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "metric,k,regime,mean,std,p5,p95\n";
  auto row = [&](const std::string& name, const MetricSummary& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%s,%.17g,%.17g,%.17g,%.17g\n",
                  name.c_str(), report.k, to_string(report.regime).c_str(),
                  m.mean, m.std, m.p5, m.p95);
    out << buf;
  };
  row("carrier_mse", report.carrier_mse);
  row("message_mse", report.message_mse);
  for (std::size_t i = 0; i < report.message_mse_each.size(); ++i)
    row("message_mse_" + std::to_string(i), report.message_mse_each[i]);
  if (report.carrier_mse_wav) row("carrier_mse_wav", *report.carrier_mse_wav);
  if (report.message_mse_wav) row("message_mse_wav", *report.message_mse_wav);
  for (std::size_t i = 0; i < report.message_mse_wav_each.size(); ++i)
    row("message_mse_wav_" + std::to_string(i), report.message_mse_wav_each[i]);
  return out.str();
}

void write_eval_csv(const EvalReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << eval_csv(report);
}

MagSpec<double> residual(const MagSpec<double>& a, const MagSpec<double>& b) {
  if (a.bins() != b.bins() || a.frames() != b.frames())
    throw InvalidInput("residual: shapes " + std::to_string(a.bins()) + "x" +
                       std::to_string(a.frames()) + " and " +
                       std::to_string(b.bins()) + "x" +
                       std::to_string(b.frames()) + " differ");
  return {(a.values - b.values).cwiseAbs(), a.config};
}

namespace {

// Perceptually ordered dark-to-bright anchors, linearly interpolated.
constexpr std::array<std::array<double, 3>, 6> kPalette{{
    {0.0, 0.0, 4.0},
    {59.0, 15.0, 112.0},
    {140.0, 41.0, 129.0},
    {222.0, 73.0, 104.0},
    {254.0, 159.0, 109.0},
    {252.0, 253.0, 191.0},
}};

std::array<std::uint8_t, 3> palette(double u) {
  u = std::clamp(u, 0.0, 1.0) * static_cast<double>(kPalette.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(u), kPalette.size() - 2);
  const double t = u - static_cast<double>(i);
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<std::uint8_t>(std::lround(
        kPalette[i][c] + t * (kPalette[i + 1][c] - kPalette[i][c])));
  return rgb;
}

}  // namespace

Image spectrogram_image(const MagSpec<double>& mag, double range_db,
                        std::optional<double> reference) {
  if (mag.values.size() == 0) throw InvalidInput("empty spectrogram");
  if (!(range_db > 0.0)) throw InvalidInput("range_db must be positive");
  Image img;
  img.width = static_cast<int>(mag.frames());
  img.height = static_cast<int>(mag.bins());
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  const double ref = reference.value_or(mag.values.maxCoeff());
  const double top = ref > 0.0 ? 20.0 * std::log10(ref) : 0.0;
  for (int y = 0; y < img.height; ++y) {
    const Index f = mag.bins() - 1 - y;
    for (int x = 0; x < img.width; ++x) {
      const double v = mag.values(f, x);
      const double u =
          (v > 0.0 && ref > 0.0)
              ? (20.0 * std::log10(v) - top + range_db) / range_db
              : 0.0;
      const auto rgb = palette(u);
      std::copy(rgb.begin(), rgb.end(),
                img.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * img.width + x) * 3);
    }
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_png(const Image& image, const fs::path& path) {
  if (image.width < 1 || image.height < 1 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw InvalidInput("write_png: malformed image");
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw InvalidInput("cannot write '" + path.string() + "'");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.rgb.data() +
                                             static_cast<std::size_t>(y) *
                                                 image.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw InvalidInput("cannot read '" + path.string() + "'");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("libpng initialisation failed");
  }
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "' is not a readable PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB ||
      png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "' is not 8-bit RGB");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y)
    png_read_row(png, img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3,
                 nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

ResidualFiles residual_export(const MagSpec<double>& reference,
                              const MagSpec<double>& estimate,
                              const PhaseSpec<double>& phase,
                              const fs::path& dir, const std::string& stem) {
  const MagSpec<double> diff = residual(reference, estimate);
  if (phase.bins() != reference.bins() || phase.frames() != reference.frames())
    throw InvalidInput("residual_export: phase shape differs");
  fs::create_directories(dir);
  ResidualFiles files;
  // A shared reference level keeps the three images comparable.
  const double ref =
      std::max(reference.values.maxCoeff(), estimate.values.maxCoeff());
  const std::pair<const char*, const MagSpec<double>*> planes[] = {
      {"", &reference}, {"_hat", &estimate}, {"_residual", &diff}};
  for (const auto& [suffix, mag] : planes) {
    files.images.push_back(dir / (stem + suffix + ".png"));
    write_png(spectrogram_image(*mag, 80.0, ref), files.images.back());
  }
  ComplexMatrix<double> z(reference.bins(), reference.frames());
  const Matrix<double> signed_diff = estimate.values - reference.values;
  z.real() = signed_diff.cwiseProduct(phase.values.array().cos().matrix());
  z.imag() = signed_diff.cwiseProduct(phase.values.array().sin().matrix());
  AudioClip audio = istft_complex<double>(z, reference.config);
  const double peak = audio.empty() ? 0.0 : audio.samples.cwiseAbs().maxCoeff();
  if (peak > kPeak) audio.samples *= kPeak / peak;
  files.audio = dir / (stem + "_residual.wav");
  write_wav(files.audio, audio);
  return files;
}

template <typename S>
std::vector<ResidualFiles> export_artifacts(const StegoArtifacts& artifacts,
                                            const ModelBundle<S>& model,
                                            bool flip, const fs::path& dir) {
  std::vector<ResidualFiles> out;
  out.push_back(residual_export(artifacts.carrier, artifacts.carrier_hat,
                                artifacts.carrier_phase, dir, "carrier"));
  RevealOptions ro;
  ro.flip = flip;
  ro.gl_iterations = 0;
  const AudioClip wav = quantize_pcm16(artifacts.stego_wav);
  ro.input_gain = 1.0 / artifacts.peak_scale;
  for (int i = 0; i < model.spec.k; ++i) {
    const RevealResult r = reveal(wav, model, message_selector(model.spec, i), ro);
    out.push_back(residual_export(artifacts.messages[static_cast<std::size_t>(i)],
                                  r.magnitude, artifacts.carrier_phase, dir,
                                  "message_" + std::to_string(i)));
  }
  return out;
}

namespace {

fs::path stimulus_path(const fs::path& out_dir, int id, char which) {
  char name[64];
  std::snprintf(name, sizeof name, "triple_%03d_%c.wav", id, which);
  return out_dir / "stimuli" / name;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

template <typename S>
std::vector<AbxKeyRow> export_abx_stimuli(const ModelBundle<S>& model,
                                          const ClipBank& bank,
                                          const StimulusOptions& options,
                                          const fs::path& out_dir) {
  if (options.n_triples < 1) throw ConfigError("n_triples must be >= 1");
  const int k = model.spec.k;
  if (bank.size() < static_cast<std::size_t>(k) + 1)
    throw ConfigError("held-out split has " + std::to_string(bank.size()) +
                      " clips; stimuli need " + std::to_string(k + 1));
  const Index length =
      static_cast<Index>(std::lround(options.seconds * model.stft.sample_rate));
  if (length <= model.stft.padding())
    throw ConfigError("stimulus duration too short for the STFT window");
  fs::create_directories(out_dir / "stimuli");
  fs::create_directories(out_dir / "key");
  std::ofstream key(out_dir / "key" / "abx_key.csv");
  std::ofstream sources(out_dir / "key" / "sources.csv");
  if (!key || !sources) throw InvalidInput("cannot write under " + out_dir.string());
  key << "triple_id,a_role,b_role,x_matches\n";
  sources << "triple_id,carrier_path,carrier_offset,samples,peak_scale\n";

  Rng rng(options.seed);
  std::vector<AbxKeyRow> rows;
  std::vector<std::size_t> order(bank.size());
  for (int id = 0; id < options.n_triples; ++id) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i <= static_cast<std::size_t>(k); ++i)
      std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
    std::vector<AudioClip> parts;
    std::vector<Index> offsets;
    for (int j = 0; j <= k; ++j) {
      const AudioClip& clip = bank.clips[order[static_cast<std::size_t>(j)]];
      const Index offset =
          clip.size() > length
              ? static_cast<Index>(uniform_index(
                    rng, static_cast<std::uint64_t>(clip.size() - length + 1)))
              : 0;
      offsets.push_back(offset);
      parts.push_back(crop(clip, offset, length));
    }
    const AudioClip original = quantize_pcm16(parts[0]);
    const StegoArtifacts art =
        hide(parts[0], {parts.begin() + 1, parts.end()}, model, options.flip);
    const AudioClip stego = quantize_pcm16(art.stego_wav);

    AbxKeyRow row;
    row.triple_id = id;
    const bool stego_first = uniform_index(rng, 2) == 1;
    row.a_role = stego_first ? "stego" : "original";
    row.b_role = stego_first ? "original" : "stego";
    const bool x_is_a = uniform_index(rng, 2) == 0;
    row.x_matches = x_is_a ? "A" : "B";
    const AudioClip& a = stego_first ? stego : original;
    const AudioClip& b = stego_first ? original : stego;
    write_wav(stimulus_path(out_dir, id, 'A'), a);
    write_wav(stimulus_path(out_dir, id, 'B'), b);
    write_wav(stimulus_path(out_dir, id, 'X'), x_is_a ? a : b);
    key << row.triple_id << ',' << row.a_role << ',' << row.b_role << ','
        << row.x_matches << '\n';
    char scale[32];
    std::snprintf(scale, sizeof scale, "%.17g", art.peak_scale);
    sources << id << ',' << bank.paths[order[0]] << ',' << offsets[0] << ','
            << length << ',' << scale << '\n';
    rows.push_back(row);
  }
  return rows;
}

std::vector<AbxKeyRow> read_abx_key(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "triple_id,a_role,b_role,x_matches")
    throw FormatError("ABX key header must be 'triple_id,a_role,b_role,x_matches'");
  std::vector<AbxKeyRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw FormatError("ABX key row malformed: " + line);
    try {
      rows.push_back({std::stoi(cells[0]), cells[1], cells[2], cells[3]});
    } catch (const std::logic_error&) {
      throw FormatError("ABX key row malformed: " + line);
    }
  }
  return rows;
}

std::vector<std::string> audit_abx_package(const fs::path& out_dir,
                                           const ClipBank& bank) {
  std::vector<std::string> problems;
  std::vector<AbxKeyRow> rows;
  try {
    rows = read_abx_key(out_dir / "key" / "abx_key.csv");
  } catch (const Error& e) {
    return {e.what()};
  }
  std::size_t wavs = 0;
  if (fs::is_directory(out_dir / "stimuli"))
    for (const auto& e : fs::directory_iterator(out_dir / "stimuli"))
      wavs += e.path().extension() == ".wav";
  if (wavs != rows.size() * 3)
    problems.push_back("found " + std::to_string(wavs) + " WAVs for " +
                       std::to_string(rows.size()) + " key rows");

  std::map<int, std::vector<std::string>> source_rows;
  {
    std::ifstream in(out_dir / "key" / "sources.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.empty()) {
        auto cells = split_csv(line);
        if (cells.size() == 5) source_rows[std::stoi(cells[0])] = cells;
      }
  }

  for (std::size_t n = 0; n < rows.size(); ++n) {
    const AbxKeyRow& row = rows[n];
    const std::string tag = "triple " + std::to_string(row.triple_id) + ": ";
    if (row.triple_id != static_cast<int>(n))
      problems.push_back(tag + "out of sequence");
    const bool roles_ok =
        (row.a_role == "original" && row.b_role == "stego") ||
        (row.a_role == "stego" && row.b_role == "original");
    if (!roles_ok) problems.push_back(tag + "roles must be one original, one stego");
    if (row.x_matches != "A" && row.x_matches != "B") {
      problems.push_back(tag + "x_matches must be A or B");
      continue;
    }
    AudioClip a, b, x;
    try {
      a = read_wav(stimulus_path(out_dir, row.triple_id, 'A'));
      b = read_wav(stimulus_path(out_dir, row.triple_id, 'B'));
      x = read_wav(stimulus_path(out_dir, row.triple_id, 'X'));
    } catch (const Error& e) {
      problems.push_back(tag + e.what());
      continue;
    }
    const AudioClip& claimed = row.x_matches == "A" ? a : b;
    const AudioClip& other = row.x_matches == "A" ? b : a;
    if (x.samples != claimed.samples)
      problems.push_back(tag + "X differs from " + row.x_matches);
    if (x.samples == other.samples)
      problems.push_back(tag + "X is indistinguishable from both");

    const auto src = source_rows.find(row.triple_id);
    if (src == source_rows.end()) {
      problems.push_back(tag + "no source record");
      continue;
    }
    const auto it = std::find(bank.paths.begin(), bank.paths.end(), src->second[1]);
    if (it == bank.paths.end()) {
      problems.push_back(tag + "source clip not in bank");
      continue;
    }
    const AudioClip expected = quantize_pcm16(
        crop(bank.clips[static_cast<std::size_t>(it - bank.paths.begin())],
             std::stoll(src->second[2]), std::stoll(src->second[3])));
    const AudioClip& original = row.a_role == "original" ? a : b;
    if (original.samples != expected.samples)
      problems.push_back(tag + "'original' file is not the source excerpt");
  }
  return problems;
}

#define SVOX_INSTANTIATE_STEGO(S)                                              \
  template MagSpec<S> flip_preprocess<S>(const MagSpec<S>&);                   \
  template StegoArtifacts hide<S>(const AudioClip&,                            \
                                  const std::vector<AudioClip>&,               \
                                  const ModelBundle<S>&, bool);                \
  template RevealResult reveal<S>(const AudioClip&, const ModelBundle<S>&,     \
                                  const MessageSelector&,                      \
                                  const RevealOptions&);                       \
  template EvalReport evaluate<S>(const ModelBundle<S>&, const ClipBank&,      \
                                  const EvalOptions&);                         \
  template EvalReport evaluate<S>(const ModelBundle<S>&,                       \
                                  const CorpusManifest&, Split,                \
                                  const EvalOptions&);                         \
  template std::vector<ResidualFiles> export_artifacts<S>(                     \
      const StegoArtifacts&, const ModelBundle<S>&, bool, const fs::path&);    \
  template std::vector<AbxKeyRow> export_abx_stimuli<S>(                       \
      const ModelBundle<S>&, const ClipBank&, const StimulusOptions&,          \
      const fs::path&);

SVOX_INSTANTIATE_STEGO(float)
SVOX_INSTANTIATE_STEGO(double)

}  // namespace svox
