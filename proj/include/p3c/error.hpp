#pragma once

#include <stdexcept>
#include <string>

namespace p3c {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A covariance matrix failed the PSD check or could not be factorized.
class NotPsdError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A plug-in quantity is degenerate (zero variance of a difference, etc.).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Numerical routine failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Wraps a failure inside one stage of a multi-stage procedure.
class StageError : public Error {
 public:
  StageError(int stage, const std::string& what)
      : Error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

}  // namespace p3c
