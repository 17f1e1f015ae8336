// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glyco {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input with a value outside its domain.
class ValidationError : public ParseError {
 public:
  using ParseError::ParseError;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Dataset-level failures: empty after cleaning, too few days, constant channel,
/// interpolation impossible.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition of a numeric routine (length mismatch, empty input).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Overflow or non-finite intermediate values.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A model could not be fitted (singular system, solver cap reached).
class FitError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FileNotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace glyco
