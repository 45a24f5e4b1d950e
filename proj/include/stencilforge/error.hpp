#pragma once

#include <stdexcept>
#include <string>

namespace stencilforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symbol or offset arity does not match the problem dimension / field arity.
class ArityError : public Error {
 public:
  using Error::Error;
};

/// Division by the zero expression, or by zero at an evaluation point.
class DivisionByZero : public Error {
 public:
  using Error::Error;
};

/// A symbol was not bound at evaluation time.
class UnboundSymbol : public Error {
 public:
  using Error::Error;
};

/// Malformed text input, with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// A well-formed problem that violates a semantic invariant (partition, offsets, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The automaton produced a non-finite value.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace stencilforge
