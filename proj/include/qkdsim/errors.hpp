// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qkdsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Too few samples to form an estimate; the message names the starved cell or set.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// CHSH value above the Tsirelson bound beyond the allowed tolerance.
class SupraQuantum : public Error {
 public:
  using Error::Error;
};

/// Requested operation has no closed form for the given configuration.
class NotApplicable : public Error {
 public:
  using Error::Error;
};

class ReconciliationFailure : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected. field() is the dotted path of the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qkdsim
