// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "svox/cli.hpp"

#include "svox/checkpoint.hpp"
#include "svox/corpus.hpp"
#include "svox/errors.hpp"
#include "svox/stego.hpp"
#include "svox/toy_speech.hpp"
#include "svox/wav.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace svox {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void echo(std::ostream& out, const std::string& command,
          const std::vector<std::pair<std::string, std::string>>& settings) {
  out << "# svox " << command << "\n";
  for (const auto& [key, value] : settings) out << key << " = " << value << "\n";
  out.flush();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

fs::path sidecar(const fs::path& wav) { return fs::path(wav.string() + ".json"); }

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

std::string metrics_header(int k) {
  std::string h = "iteration,phase,total,carrier_loss,message_loss";
  for (int i = 0; i < k; ++i) h += ",message_loss_" + std::to_string(i);
  return h + ",adversarial_loss,discriminator_loss\n";
}

std::string metrics_row(const LossReport& r, const TrainConfig& cfg) {
  std::string row = std::to_string(r.iteration) + "," +
                    std::to_string(phase_at(cfg, r.iteration).phase) + "," +
                    fmt(r.total) + "," + fmt(r.carrier_loss) + "," +
                    fmt(r.mean_message_loss());
  for (const double m : r.message_losses) row += "," + fmt(m);
  row += "," + (r.adversarial_loss ? fmt(*r.adversarial_loss) : std::string());
  row += "," + (r.discriminator_loss ? fmt(*r.discriminator_loss) : std::string());
  return row + "\n";
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(args.config);
  if (!args.data.empty()) cfg.data_dir = args.data;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (cfg.data_dir.empty()) throw ConfigError("no data directory (--data or data_dir)");
  if (cfg.out_dir.empty()) throw ConfigError("no output directory (--out or out_dir)");
  echo(out, "train", describe(cfg));

  const fs::path run_dir = cfg.out_dir;
  fs::create_directories(run_dir / "checkpoints");
  {
    std::ofstream f(run_dir / "config.txt");
    f << format_run_config(cfg);
  }

  SplitRule rule;
  rule.seed = cfg.split_seed;
  const CorpusManifest manifest =
      scan_corpus(cfg.data_dir, rule, cfg.stft.sample_rate);
  for (const auto& d : manifest.diagnostics) err << "skipped " << d << "\n";
  write_manifest_csv(manifest, run_dir / "manifest.csv");
  const ClipBank bank = load_clips(manifest, Split::train);
  out << "corpus: " << bank.size() << " train clips, "
      << manifest.in_split(Split::val).size() << " val, "
      << manifest.in_split(Split::test).size() << " test\n";

  ClipBank noise;
  if (cfg.train.noise_coeff > 0.0) {
    noise = cfg.noise_dir.empty()
                ? synthetic_noise_bank(mix_seed(cfg.train.seed, 0x6e6f697365ULL), 4,
                                       3.0, cfg.stft.sample_rate)
                : load_noise_bank(cfg.noise_dir, cfg.stft.sample_rate);
    out << "noise: " << noise.size() << " clips"
        << (cfg.noise_dir.empty() ? " (synthetic babble)" : "") << "\n";
  }

  const BatchSource source =
      make_batch_source(bank, batch_request(cfg.train, cfg.stft),
                        noise.empty() ? nullptr : &noise, cfg.train.seed);
  // Fail on an undersized split before any training.
  source(0);

  auto make_checkpoint = [&](const ModelBundle<float>& m, int iteration) {
    Checkpoint ck;
    ck.model = m;
    ck.config_digest = digest(cfg.train);
    ck.regime = cfg.train.regime;
    ck.iteration = iteration;
    ck.data_seed = cfg.train.seed;
    return ck;
  };

  std::ofstream metrics(run_dir / "metrics.csv");
  metrics << metrics_header(cfg.train.k);
  TrainHooks<float> hooks;
  hooks.on_report = [&](const LossReport& r) {
    metrics << metrics_row(r, cfg.train);
    if ((r.iteration + 1) % std::max(1, cfg.train.iterations / 10) == 0)
      out << "iteration " << r.iteration + 1 << " total " << fmt(r.total) << "\n";
  };
  hooks.checkpoint_interval = cfg.checkpoint_interval;
  hooks.on_checkpoint = [&](int iteration, const ModelBundle<float>& m) {
    char name[64];
    std::snprintf(name, sizeof name, "iter_%07d.svox", iteration);
    save_checkpoint(make_checkpoint(m, iteration), run_dir / "checkpoints" / name);
  };

  TrainResult<float> result;
  try {
    result = train<float>(source, cfg.train,
                          init_model<float>(cfg.model, cfg.stft,
                                            cfg.effective_init_seed()),
                          hooks);
  } catch (const NumericFailure& e) {
    metrics.flush();
    std::ofstream dump(run_dir / "divergence.txt");
    dump << e.what() << "\n" << e.diagnostics() << "\n";
    err << "error: " << e.what() << "\n" << e.diagnostics() << "\n";
    return kExitNumeric;
  }
  metrics.flush();
  save_checkpoint(make_checkpoint(result.model, cfg.train.iterations),
                  run_dir / "final.svox");
  out << "final checkpoint: " << (run_dir / "final.svox").string() << "\n";

  const ClipBank val = load_clips(manifest, Split::val);
  if (cfg.eval_examples > 0 && val.size() >= static_cast<std::size_t>(cfg.train.k) + 1) {
    EvalOptions eo;
    eo.n_examples = cfg.eval_examples;
    eo.seed = cfg.eval_seed;
    eo.frames_per_example = cfg.eval_frames;
    eo.regime = cfg.train.regime;
    const EvalReport report = evaluate(result.model, val, eo);
    write_eval_csv(report, run_dir / "validation.csv");
    out << "validation carrier_mse " << fmt(report.carrier_mse.mean)
        << " message_mse " << fmt(report.message_mse.mean) << "\n";
  } else {
    out << "validation skipped: val split has " << val.size() << " clips\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- hide

struct HideArgs {
  std::string checkpoint;
  std::string carrier;
  std::vector<std::string> messages;
  std::string out;
  bool flip = false;
  std::string artifacts;
};

int cmd_hide(const HideArgs& args, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  echo(out, "hide",
       {{"checkpoint", args.checkpoint},
        {"carrier", args.carrier},
        {"messages", std::to_string(args.messages.size())},
        {"out", args.out},
        {"flip", args.flip ? "true" : "false"},
        {"artifacts", args.artifacts.empty() ? "none" : args.artifacts}});
  const int rate = ck.model.stft.sample_rate;
  if (static_cast<int>(args.messages.size()) != ck.model.spec.k)
    throw ConfigError("checkpoint hides k = " + std::to_string(ck.model.spec.k) +
                      " messages, got " + std::to_string(args.messages.size()));
  const AudioClip carrier = read_wav(args.carrier, rate);
  std::vector<AudioClip> messages;
  for (const auto& m : args.messages) messages.push_back(read_wav(m, rate));

  const StegoArtifacts art = hide(carrier, messages, ck.model, args.flip);
  write_wav(args.out, art.stego_wav);
  const AudioClip written = quantize_pcm16(art.stego_wav);
  const double carrier_mse =
      mse<double>(art.carrier.values,
                  stft<double>(written, ck.model.stft).magnitude.values);
  write_json(sidecar(args.out), {{"peak_scale", art.peak_scale},
                                 {"k", ck.model.spec.k},
                                 {"flip", args.flip},
                                 {"samples", art.stego_wav.size()},
                                 {"carrier_mse", carrier_mse}});
  out << "wrote " << args.out << " (" << art.stego_wav.size()
      << " samples, peak_scale " << fmt(art.peak_scale) << ", carrier_mse "
      << fmt(carrier_mse) << ")\n";
  if (!args.artifacts.empty()) {
    export_artifacts(art, ck.model, args.flip, args.artifacts);
    out << "artifacts in " << args.artifacts << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- reveal

struct RevealArgs {
  std::string checkpoint;
  std::string stego;
  std::optional<int> which;
  std::optional<int> code;
  bool flip = false;
  std::string out;
  int gl_iterations = 50;
  std::uint64_t seed = 0;
  std::optional<double> gain;
  std::string reference;
};

MessageSelector selector_for(const ArchitectureSpec& spec, const RevealArgs& a) {
  if (spec.conditional) {
    if (a.which) throw ConfigError("checkpoint has a conditional decoder; use --code");
    if (!a.code) throw ConfigError("conditional decoder needs --code");
    return ConditionCode{*a.code, spec.k};
  }
  if (a.code)
    throw ConfigError("--code needs a conditional checkpoint; this one has " +
                      std::to_string(spec.k) + " separate decoder(s), use --which");
  if (spec.k == 1) {
    if (a.which && *a.which != 0) throw ConfigError("--which must be 0 for k = 1");
    return std::monostate{};
  }
  if (!a.which) throw ConfigError("multi-decoder checkpoint needs --which");
  return *a.which;
}

int cmd_reveal(const RevealArgs& args, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const MessageSelector which = selector_for(ck.model.spec, args);
  RevealOptions opt;
  opt.flip = args.flip;
  opt.gl_iterations = args.gl_iterations;
  opt.seed = args.seed;
  std::string gain_source = "default";
  if (args.gain) {
    opt.input_gain = *args.gain;
    gain_source = "--gain";
  } else if (fs::exists(sidecar(args.stego))) {
    std::ifstream in(sidecar(args.stego));
    const json meta = json::parse(in, nullptr, false);
    if (meta.is_object() && meta.contains("peak_scale") &&
        meta["peak_scale"].is_number() && meta["peak_scale"].get<double>() > 0.0) {
      opt.input_gain = 1.0 / meta["peak_scale"].get<double>();
      gain_source = sidecar(args.stego).string();
    }
  }
  if (!(opt.input_gain > 0.0)) throw ConfigError("--gain must be positive");
  echo(out, "reveal",
       {{"checkpoint", args.checkpoint},
        {"stego", args.stego},
        {"which", args.which ? std::to_string(*args.which) : "none"},
        {"code", args.code ? std::to_string(*args.code) : "none"},
        {"flip", args.flip ? "true" : "false"},
        {"out", args.out},
        {"gl_iterations", std::to_string(args.gl_iterations)},
        {"seed", std::to_string(args.seed)},
        {"input_gain", fmt(opt.input_gain) + " (" + gain_source + ")"},
        {"reference", args.reference.empty() ? "none" : args.reference}});

  const AudioClip stego = read_wav(args.stego, ck.model.stft.sample_rate);
  const RevealResult r = reveal(stego, ck.model, which, opt);
  json meta = {{"low_confidence", r.low_confidence},
               {"negative_energy", r.negative_energy},
               {"relative_level_db", r.relative_level_db},
               {"frames", r.magnitude.frames()}};
  if (!args.reference.empty()) {
    AudioClip ref = read_wav(args.reference, ck.model.stft.sample_rate);
    ref = crop(ref, 0, stego.size());
    const double m = mse<double>(stft<double>(ref, ck.model.stft).magnitude.values,
                                 r.magnitude.values);
    meta["message_mse"] = m;
    out << "message_mse " << fmt(m) << "\n";
  }
  if (args.gl_iterations > 0) {
    AudioClip audio = r.message;
    const double peak = audio.samples.cwiseAbs().maxCoeff();
    if (peak > 32767.0 / 32768.0) audio.samples *= (32767.0 / 32768.0) / peak;
    write_wav(args.out, audio);
    out << "wrote " << args.out << "\n";
  }
  write_json(sidecar(args.out), meta);
  if (r.low_confidence)
    err << "warning: low confidence (negative_energy "
        << fmt(r.negative_energy) << ", level " << fmt(r.relative_level_db)
        << " dB); the input may not hold a message for this checkpoint\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "val";
  int n = 100;
  std::uint64_t seed = 0;
  int frames = 64;
  std::uint64_t split_seed = 0;
  bool flip = false;
  std::string out;
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const auto split = parse_split(args.split);
  if (!split) throw ConfigError("unknown split '" + args.split + "'");
  echo(out, "eval",
       {{"checkpoint", args.checkpoint},
        {"data", args.data},
        {"split", to_string(*split)},
        {"n", std::to_string(args.n)},
        {"seed", std::to_string(args.seed)},
        {"frames", std::to_string(args.frames)},
        {"split_seed", std::to_string(args.split_seed)},
        {"flip", args.flip ? "true" : "false"},
        {"regime", to_string(ck.regime)},
        {"out", args.out}});
  SplitRule rule;
  rule.seed = args.split_seed;
  const CorpusManifest manifest =
      scan_corpus(args.data, rule, ck.model.stft.sample_rate);
  EvalOptions opt;
  opt.n_examples = args.n;
  opt.seed = args.seed;
  opt.frames_per_example = args.frames;
  opt.flip = args.flip;
  opt.regime = ck.regime;
  const EvalReport report = evaluate(ck.model, manifest, *split, opt);
  write_eval_csv(report, args.out);
  out << eval_csv(report);
  return kExitOk;
}

// ---------------------------------------------------------------- stimuli

struct StimuliArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  int n = 50;
  std::uint64_t seed = 0;
  double seconds = 3.0;
  std::uint64_t split_seed = 0;
  bool flip = false;
  std::string out;
};

int cmd_stimuli(const StimuliArgs& args, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const auto split = parse_split(args.split);
  if (!split) throw ConfigError("unknown split '" + args.split + "'");
  echo(out, "stimuli",
       {{"checkpoint", args.checkpoint},
        {"data", args.data},
        {"split", to_string(*split)},
        {"n", std::to_string(args.n)},
        {"seed", std::to_string(args.seed)},
        {"seconds", fmt(args.seconds)},
        {"split_seed", std::to_string(args.split_seed)},
        {"flip", args.flip ? "true" : "false"},
        {"out", args.out}});
  SplitRule rule;
  rule.seed = args.split_seed;
  const ClipBank bank = load_clips(
      scan_corpus(args.data, rule, ck.model.stft.sample_rate), *split);
  StimulusOptions opt;
  opt.n_triples = args.n;
  opt.seed = args.seed;
  opt.seconds = args.seconds;
  opt.flip = args.flip;
  export_abx_stimuli(ck.model, bank, opt, args.out);
  const auto problems = audit_abx_package(args.out, bank);
  for (const auto& p : problems) out << "audit: " << p << "\n";
  if (!problems.empty()) throw InvalidInput("stimulus package failed its self-audit");
  out << "wrote " << 3 * args.n << " stimuli and key; audit passed\n";
  return kExitOk;
}

// ---------------------------------------------------------------- toy corpus

struct ToyArgs {
  std::string out;
  ToyCorpusLayout layout;
  std::uint64_t seed = 0;
};

int cmd_make_toy_corpus(const ToyArgs& args, std::ostream& out) {
  echo(out, "make-toy-corpus",
       {{"out", args.out},
        {"train", std::to_string(args.layout.train)},
        {"val", std::to_string(args.layout.val)},
        {"test", std::to_string(args.layout.test)},
        {"min_seconds", fmt(args.layout.min_seconds)},
        {"max_seconds", fmt(args.layout.max_seconds)},
        {"seed", std::to_string(args.seed)}});
  if (args.layout.train < 0 || args.layout.val < 0 || args.layout.test < 0 ||
      !(args.layout.min_seconds > 0.0) ||
      args.layout.max_seconds < args.layout.min_seconds)
    throw ConfigError("invalid toy corpus layout");
  write_toy_corpus(args.out, args.layout, args.seed);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"svox: hide speech inside speech"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("svox checkpoint format ") +
                                        std::to_string(kCheckpointVersion));

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model from a run config");
  train_cmd->add_option("--config", ta.config, "run config file")->required();
  train_cmd->add_option("--data", ta.data, "corpus root (overrides data_dir)");
  train_cmd->add_option("--out", ta.out, "run directory (overrides out_dir)");

  HideArgs ha;
  auto* hide_cmd = app.add_subcommand("hide", "hide messages inside a carrier WAV");
  hide_cmd->add_option("--checkpoint", ha.checkpoint)->required();
  hide_cmd->add_option("--carrier", ha.carrier)->required();
  hide_cmd->add_option("--message", ha.messages, "one per hidden message")->required();
  hide_cmd->add_option("--out", ha.out, "stego WAV")->required();
  hide_cmd->add_flag("--flip", ha.flip, "flip messages in time and frequency");
  hide_cmd->add_option("--artifacts", ha.artifacts,
                       "directory for spectrogram images and residual audio");

  RevealArgs ra;
  auto* reveal_cmd = app.add_subcommand("reveal", "recover a message from a stego WAV");
  reveal_cmd->add_option("--checkpoint", ra.checkpoint)->required();
  reveal_cmd->add_option("--stego", ra.stego)->required();
  auto* which_opt = reveal_cmd->add_option("--which", ra.which, "decoder index");
  auto* code_opt = reveal_cmd->add_option("--code", ra.code, "condition code index");
  which_opt->excludes(code_opt);
  reveal_cmd->add_flag("--flip", ra.flip, "undo hide --flip");
  reveal_cmd->add_option("--out", ra.out, "message WAV")->required();
  reveal_cmd->add_option("--gl-iterations", ra.gl_iterations,
                         "Griffin-Lim iterations; 0 writes metadata only")
      ->check(CLI::NonNegativeNumber);
  reveal_cmd->add_option("--seed", ra.seed, "Griffin-Lim initial phase seed");
  reveal_cmd->add_option("--gain", ra.gain,
                         "input gain; default 1 / peak_scale from the hide sidecar");
  reveal_cmd->add_option("--reference", ra.reference,
                         "original message WAV; reports the magnitude MSE");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--data", ea.data)->required();
  eval_cmd->add_option("--split", ea.split, "train, val or test");
  eval_cmd->add_option("--n", ea.n, "examples")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", ea.seed);
  eval_cmd->add_option("--frames", ea.frames)->check(CLI::Range(2, 1 << 20));
  eval_cmd->add_option("--split-seed", ea.split_seed);
  eval_cmd->add_flag("--flip", ea.flip);
  eval_cmd->add_option("--out", ea.out, "CSV report")->required();

  StimuliArgs sa;
  auto* stim_cmd = app.add_subcommand("stimuli", "write an ABX listening package");
  stim_cmd->add_option("--checkpoint", sa.checkpoint)->required();
  stim_cmd->add_option("--data", sa.data)->required();
  stim_cmd->add_option("--split", sa.split, "held-out split");
  stim_cmd->add_option("--n", sa.n, "triples")->check(CLI::PositiveNumber);
  stim_cmd->add_option("--seed", sa.seed);
  stim_cmd->add_option("--seconds", sa.seconds)->check(CLI::PositiveNumber);
  stim_cmd->add_option("--split-seed", sa.split_seed);
  stim_cmd->add_flag("--flip", sa.flip);
  stim_cmd->add_option("--out", sa.out)->required();

  ToyArgs ya;
  auto* toy_cmd = app.add_subcommand("make-toy-corpus", "write a synthetic speech corpus");
  toy_cmd->add_option("--out", ya.out)->required();
  toy_cmd->add_option("--train", ya.layout.train);
  toy_cmd->add_option("--val", ya.layout.val);
  toy_cmd->add_option("--test", ya.layout.test);
  toy_cmd->add_option("--min-seconds", ya.layout.min_seconds);
  toy_cmd->add_option("--max-seconds", ya.layout.max_seconds);
  toy_cmd->add_option("--seed", ya.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(ta, out, err);
    if (*hide_cmd) return cmd_hide(ha, out);
    if (*reveal_cmd) return cmd_reveal(ra, out, err);
    if (*eval_cmd) return cmd_eval(ea, out);
    if (*stim_cmd) return cmd_stimuli(sa, out);
    if (*toy_cmd) return cmd_make_toy_corpus(ya, out);
  } catch (const NumericFailure& e) {
    err << "error: " << e.what() << "\n" << e.diagnostics() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  std::vector<const char*> argv{"svox"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace svox
