#pragma once

#include <stdexcept>
#include <string>

namespace lorf {

/// Base class for every error raised by the library. The CLI maps these to
/// exit code 1 and prints what().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid options, grids, controls or file schemas.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `row` is the 1-based data row (header excluded),
/// or 0 when the problem is in the header.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t row)
      : Error(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (singular system, non-finite result).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between a model and its input.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace lorf
