#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advpref {

// Base class for every failure raised by the library. Each subclass maps to a
// stable process exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

// Bad invocation: unknown flag, empty sweep grid, missing required argument.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

// A configuration value is out of range or malformed.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed input line; line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed data that violates a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Exhaustive enumeration asked for more work than the configured bound.
class RefusalError : public Error {
 public:
  using Error::Error;
};

// Synthetic data generation could not satisfy the requested constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Teacher construction did not reach its target pass rate.
class BuildError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during training. Carries the path of the state dump.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::string dump_path);
  const std::string& dump_path() const noexcept { return dump_path_; }
  int exit_code() const noexcept override { return 3; }

 private:
  std::string dump_path_;
};

}  // namespace advpref
