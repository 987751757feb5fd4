#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluent {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Model-definition errors (syntax, I/O). The CLI maps these to exit code 1.

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SyntaxError : public ParseError {
 public:
  using ParseError::ParseError;
};

class DuplicateId : public ParseError {
 public:
  using ParseError::ParseError;
};

class UnknownOperatorKind : public ParseError {
 public:
  using ParseError::ParseError;
};

// ---------------------------------------------------------------------------
// Structural errors. The CLI maps these to exit code 2.

class ValidationError : public Error {
 public:
  using Error::Error;
};

class CycleError : public ValidationError {
 public:
  explicit CycleError(std::vector<std::string> path);
  const std::vector<std::string>& path() const { return path_; }

 private:
  std::vector<std::string> path_;
};

class UnknownObserver : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NoComparableObservers : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidParams : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidGrammar : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---------------------------------------------------------------------------
// Faults raised while executing a model. The CLI maps these to exit code 3.

class RuntimeFault : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public RuntimeFault {
 public:
  using RuntimeFault::RuntimeFault;
};

class NonFiniteState : public RuntimeFault {
 public:
  using RuntimeFault::RuntimeFault;
};

class NegativeActivation : public RuntimeFault {
 public:
  using RuntimeFault::RuntimeFault;
};

class EventCycleError : public RuntimeFault {
 public:
  explicit EventCycleError(std::vector<std::string> path);
  const std::vector<std::string>& path() const { return path_; }

 private:
  std::vector<std::string> path_;
};

class UnknownTarget : public RuntimeFault {
 public:
  using RuntimeFault::RuntimeFault;
};

class GroundingWindowEmpty : public RuntimeFault {
 public:
  using RuntimeFault::RuntimeFault;
};

// ---------------------------------------------------------------------------
// Symbolic encoding errors.

class TermParseError : public Error {
 public:
  TermParseError(const std::string& what, std::size_t position)
      : Error("position " + std::to_string(position) + ": " + what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class OneHotViolation : public Error {
 public:
  using Error::Error;
};

/// Joins a witness path as "a -> b -> a".
std::string format_path(const std::vector<std::string>& path);

}  // namespace fluent
