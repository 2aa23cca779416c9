#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pourbench {

/// Base for every expected failure the library reports. The CLI turns these
/// into one-line diagnostics; anything else is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or infeasible configuration (capacity exceeded, dataset too small, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller misuse: empty sequences, mismatched lengths or dimensions.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::size_t line = 0)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The scripted demonstrator failed to finish a scenario.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pourbench
