// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Run configuration files and the svox command-line tool.

#pragma once

#include "svox/dsp.hpp"
#include "svox/nets.hpp"
#include "svox/trainloop.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace svox {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Everything a training run needs. The architecture's k and conditional flag
/// follow train.k and train.decoder_mode.
struct RunConfig {
  TrainConfig train;
  ArchitectureSpec model;
  StftConfig stft;
  /// Seed of the parameter initialisation; follows train.seed when unset.
  std::optional<std::uint64_t> init_seed;
  std::uint64_t split_seed = 0;
  std::string data_dir;
  std::string out_dir;
  /// Noise clips; empty selects seeded synthetic babble.
  std::string noise_dir;
  int checkpoint_interval = 1000;
  int eval_examples = 100;
  int eval_frames = 64;
  std::uint64_t eval_seed = 0;

  std::uint64_t effective_init_seed() const { return init_seed.value_or(train.seed); }
  /// Throws ConfigError on any invalid or inconsistent field.
  void validate() const;
};

/// Key and one-line description of every accepted RunConfig key.
const std::vector<std::pair<std::string, std::string>>& run_config_keys();

/// `key = value` lines; '#' starts a comment. Throws ConfigError naming the
/// offending key (unknown, repeated, or malformed value) or line.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every key with its effective value, in run_config_keys() order.
std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg);
/// describe() as parseable `key = value` text.
std::string format_run_config(const RunConfig& cfg);

/// Entry point of the svox tool. Returns kExitOk, kExitUsage on usage,
/// configuration or input errors, kExitNumeric on training divergence.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace svox
