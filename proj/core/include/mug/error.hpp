#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mug {

/// Base of every exception thrown by the library. The CLI maps these to exit
/// code 1 (user/config problems); anything else is treated as internal.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based data row when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0)
      : Error(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class IngestionError : public Error {
  using Error::Error;
};

class SchemaError : public Error {
  using Error::Error;
};

class ConfigError : public Error {
  using Error::Error;
};

/// A caller broke a documented precondition (shape mismatch, index range, ...).
class ContractError : public Error {
  using Error::Error;
};

class DomainError : public Error {
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
  using Error::Error;
};

class SearchError : public Error {
  using Error::Error;
};

/// Internal numeric invariant violated (e.g. NaN escaped an operation).
class NumericError : public std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace mug
