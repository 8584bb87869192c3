// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/cli.hpp"

#include "svox/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace svox {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(std::string_view v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty())
    throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  return out;
}

int parse_int(std::string_view v) { return parse_integer<int>(v); }
std::uint64_t parse_u64(std::string_view v) { return parse_integer<std::uint64_t>(v); }

double parse_real(std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out))
    throw ConfigError("expected a finite number, got '" + s + "'");
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SVOX_INT_FIELD(KEY, MEMBER, DOC)                                     \
  Field {                                                                    \
    KEY, DOC, [](RunConfig& c, std::string_view v) { c.MEMBER = parse_int(v); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }          \
  }
#define SVOX_REAL_FIELD(KEY, MEMBER, DOC)                                    \
  Field {                                                                    \
    KEY, DOC, [](RunConfig& c, std::string_view v) { c.MEMBER = parse_real(v); }, \
        [](const RunConfig& c) { return format_double(c.MEMBER); }           \
  }
#define SVOX_U64_FIELD(KEY, MEMBER, DOC)                                     \
  Field {                                                                    \
    KEY, DOC, [](RunConfig& c, std::string_view v) { c.MEMBER = parse_u64(v); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }          \
  }
#define SVOX_TEXT_FIELD(KEY, MEMBER, DOC)                                    \
  Field {                                                                    \
    KEY, DOC,                                                                \
        [](RunConfig& c, std::string_view v) { c.MEMBER = std::string(v); }, \
        [](const RunConfig& c) { return c.MEMBER; }                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"regime", "training regime: SFS, FTD, FTA or SFS_FTD",
       [](RunConfig& c, std::string_view v) { c.train.regime = parse_regime(v); },
       [](const RunConfig& c) { return to_string(c.train.regime); }},
      SVOX_INT_FIELD("k", train.k, "messages hidden per carrier"),
      {"decoder_mode", "message decoding: single, multi or conditional",
       [](RunConfig& c, std::string_view v) {
         c.train.decoder_mode = parse_decoder_mode(v);
       },
       [](const RunConfig& c) { return to_string(c.train.decoder_mode); }},
      SVOX_REAL_FIELD("lambda_c", train.lambda_c, "carrier loss weight"),
      SVOX_REAL_FIELD("lambda_m", train.lambda_m, "message loss weight"),
      SVOX_REAL_FIELD("lambda_g", train.lambda_g,
                      "adversarial weight; 0 disables the discriminator loss"),
      SVOX_INT_FIELD("iterations", train.iterations, "optimiser steps"),
      {"phase1_iterations",
       "length of phase 1 for FTD, FTA and SFS_FTD; auto = iterations / 2",
       [](RunConfig& c, std::string_view v) {
         if (v == "auto")
           c.train.phase1_iterations.reset();
         else
           c.train.phase1_iterations = parse_int(v);
       },
       [](const RunConfig& c) {
         return c.train.phase1_iterations ? std::to_string(*c.train.phase1_iterations)
                                          : std::string("auto");
       }},
      SVOX_REAL_FIELD("learning_rate", train.learning_rate, "Adam step size"),
      SVOX_REAL_FIELD("adam_beta1", train.adam_beta1, "Adam first-moment decay"),
      SVOX_REAL_FIELD("adam_beta2", train.adam_beta2, "Adam second-moment decay"),
      SVOX_REAL_FIELD("adam_epsilon", train.adam_epsilon, "Adam denominator floor"),
      SVOX_INT_FIELD("batch_size", train.batch_size, "examples per step"),
      SVOX_REAL_FIELD("noise_coeff", train.noise_coeff,
                      "carrier noise level relative to the carrier RMS; 0 = clean"),
      SVOX_REAL_FIELD("flip_probability", train.flip_probability,
                      "share of training messages fed flipped; 0.5 serves --flip"),
      SVOX_U64_FIELD("seed", train.seed, "seed of the batch sampler"),
      SVOX_INT_FIELD("frames_per_example", train.frames_per_example,
                     "STFT frames per training crop"),
      SVOX_INT_FIELD("log_interval", train.log_interval,
                     "report every this many steps"),
      SVOX_INT_FIELD("kernel_count", model.kernel_count,
                     "kernels per gated block"),
      SVOX_INT_FIELD("encoder_blocks", model.encoder_blocks,
                     "gated blocks in the carrier encoder"),
      SVOX_INT_FIELD("carrier_decoder_blocks", model.carrier_decoder_blocks,
                     "gated blocks in the carrier decoder"),
      SVOX_INT_FIELD("message_decoder_blocks", model.message_decoder_blocks,
                     "gated blocks in each message decoder"),
      SVOX_INT_FIELD("discriminator_layers", model.discriminator_layers,
                     "gated blocks in the discriminator"),
      {"discriminator", "build the discriminator (required when lambda_g > 0)",
       [](RunConfig& c, std::string_view v) { c.model.discriminator = parse_bool(v); },
       [](const RunConfig& c) { return bool_text(c.model.discriminator); }},
      SVOX_INT_FIELD("fft_size", stft.fft_size, "FFT length"),
      SVOX_INT_FIELD("hop", stft.hop, "STFT hop in samples"),
      SVOX_INT_FIELD("window_length", stft.window_length, "analysis window length"),
      {"window", "analysis window: hann, sqrt_hann or rectangular",
       [](RunConfig& c, std::string_view v) { c.stft.window = parse_window(v); },
       [](const RunConfig& c) { return to_string(c.stft.window); }},
      SVOX_INT_FIELD("sample_rate", stft.sample_rate, "expected WAV sample rate"),
      {"magnitude_scale", "spectrogram scaling: dft or amplitude",
       [](RunConfig& c, std::string_view v) { c.stft.scale = parse_magnitude_scale(v); },
       [](const RunConfig& c) { return to_string(c.stft.scale); }},
      {"init_seed", "seed of the parameter initialisation; auto = seed",
       [](RunConfig& c, std::string_view v) {
         if (v == "auto")
           c.init_seed.reset();
         else
           c.init_seed = parse_u64(v);
       },
       [](const RunConfig& c) {
         return c.init_seed ? std::to_string(*c.init_seed) : std::string("auto");
       }},
      SVOX_U64_FIELD("split_seed", split_seed,
                     "seed of the hash split for corpora without split folders"),
      SVOX_TEXT_FIELD("data_dir", data_dir, "corpus root (overridden by --data)"),
      SVOX_TEXT_FIELD("out_dir", out_dir, "run directory (overridden by --out)"),
      SVOX_TEXT_FIELD("noise_dir", noise_dir,
                      "noise WAV directory; empty = synthetic babble"),
      SVOX_INT_FIELD("checkpoint_interval", checkpoint_interval,
                     "steps between periodic checkpoints; 0 = final only"),
      SVOX_INT_FIELD("eval_examples", eval_examples,
                     "validation examples evaluated after training"),
      SVOX_INT_FIELD("eval_frames", eval_frames, "frames per validation example"),
      SVOX_U64_FIELD("eval_seed", eval_seed, "seed of the validation pairings"),
  };
  return table;
}

#undef SVOX_INT_FIELD
#undef SVOX_REAL_FIELD
#undef SVOX_U64_FIELD
#undef SVOX_TEXT_FIELD

}  // namespace

void RunConfig::validate() const {
  train.validate();
  model.validate();
  stft.validate();
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
  if (eval_examples < 0) throw ConfigError("eval_examples must be >= 0");
  if (eval_frames < 2) throw ConfigError("eval_frames must be >= 2");
  if (train.lambda_g > 0.0 && !model.discriminator)
    throw ConfigError("lambda_g > 0 requires discriminator = true");
  train.check_model(model);
}

const std::vector<std::pair<std::string, std::string>>& run_config_keys() {
  static const auto keys = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Field& f : fields()) out.emplace_back(f.key, f.doc);
    return out;
  }();
  return keys;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == table.end())
      throw ConfigError("unknown config key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    if (!seen.insert(key).second)
      throw ConfigError("config key '" + key + "' given twice");
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  cfg.model.k = cfg.train.k;
  cfg.model.conditional = cfg.train.decoder_mode == DecoderMode::conditional;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : describe(cfg)) out += key + " = " + value + "\n";
  return out;
}

}  // namespace svox
