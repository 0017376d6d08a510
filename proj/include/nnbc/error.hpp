#pragma once

#include <stdexcept>
#include <string>

namespace nnbc {

/// Evaluation outside the domain of an operation (division by zero, negative
/// sqrt, tan pole) or a non-finite value produced while recording.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NonFiniteError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Malformed text input. Line and column are 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column) {
    if (line <= 0) return what;
    return std::to_string(line) + ":" + std::to_string(column) + ": " + what;
  }

  int line_;
  int column_;
};

class UnboundIdentifier : public ParseError {
 public:
  UnboundIdentifier(const std::string& name, int line, int column)
      : ParseError("unbound identifier '" + name + "'", line, column), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace nnbc
