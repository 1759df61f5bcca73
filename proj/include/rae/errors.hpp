#pragma once

#include <stdexcept>
#include <string>

namespace rae {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An object was used in the wrong state, e.g. backward without forward.
class StateError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or a failed factorization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid model/experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data. Carries the 1-based data row when known (0 otherwise).
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t row = 0)
      : Error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rae
