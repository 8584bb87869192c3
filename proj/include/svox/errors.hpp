// Copyright 2026 The svox Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace svox {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract arguments (empty clips, shape mismatches).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Files that do not parse, or audio at the wrong rate/channel layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration: bad k, mode/selector mismatch, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

/// Checkpoint whose trailing checksum does not match its contents.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf during training. `diagnostics` holds a human-readable state dump.
class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

}  // namespace svox
