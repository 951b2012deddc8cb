#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ramol {

// Bad flags, config keys or hyperparameter ranges. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Vector or matrix shapes that do not agree with the configured dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or malformed input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(row ? what + " (row " + std::to_string(*row) + ")" : what), row_(row) {}

  // 1-based data row (header excluded) when the error is tied to one row.
  std::optional<std::size_t> row() const { return row_; }

 private:
  std::optional<std::size_t> row_;
};

// A NaN or infinity reached the model. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ramol
