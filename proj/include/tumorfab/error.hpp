#pragma once

#include <stdexcept>
#include <string>

namespace tumorfab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, shape mismatches, out-of-range configuration values.
/// The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File-system and format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but carries no usable signal (e.g. an all-zero channel).
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Mask sampling gave up after every attempt was rejected.
class SamplingExhaustedError : public Error {
 public:
  SamplingExhaustedError(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Optimization produced NaN/Inf.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(const std::string& what, long long step)
      : Error(what), step_(step) {}
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace tumorfab
