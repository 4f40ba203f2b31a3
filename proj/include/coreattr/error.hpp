#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coreattr {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI for exit codes and JSON errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed input text. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  const char* kind() const noexcept override { return "parse"; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class BoundsError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "bounds"; }
};

class ParameterError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parameter"; }
};

class EstimationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "estimation"; }
};

/// A conditional expectation was requested on an event with zero mass.
class UndefinedConditionalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "undefined_conditional"; }
};

class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training"; }
};

class MetricError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "metric"; }
};

class VerificationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "verification"; }
};

/// Source columns do not match the ingestion schema.
class SchemaError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "schema"; }
};

/// Too many malformed source rows, or an unreadable source.
class IngestionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ingestion"; }
};

}  // namespace coreattr
