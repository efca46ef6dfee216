#pragma once

#include <stdexcept>
#include <string>

namespace pointprobe {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Caller passed an argument outside the documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input geometry too degenerate to work with (collocated points,
/// zero leading eigenvalue, vanishing normalizer, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds an exact-enumeration limit.
class SizeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Model oracle misbehaved (bad wire payload, broken subprocess, timeout,
/// invalid probability simplex). Carries the raw payload when available.
class OracleError : public Error {
 public:
  explicit OracleError(const std::string& msg, std::string payload = "")
      : Error(payload.empty() ? msg : msg + "; payload: " + payload),
        payload_(std::move(payload)) {}
  const std::string& payload() const { return payload_; }

 private:
  std::string payload_;
};

/// Training diverged or could not proceed.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Configuration file / CLI flag problem.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem problem.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pointprobe
