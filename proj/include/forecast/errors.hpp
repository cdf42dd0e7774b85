#pragma once

#include <stdexcept>
#include <string>

namespace forecast {

// Base type for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor/matrix shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid argument value (bad enum, non-positive step, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Malformed input data (CSV/JSON records).
struct ParseError : Error {
  using Error::Error;
};

// Inconsistent configuration (split policies, missing fields, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values or singular systems.
struct NumericError : Error {
  using Error::Error;
};

// API misuse (non-scalar loss, leaked test data, ...).
struct ContractError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace forecast
