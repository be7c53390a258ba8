#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpseg {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input violates a structural precondition (index order, lengths, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but degenerate for the statistic (e.g. zero variance).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Two independent numerical routes disagree, or an iterative solver failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cpseg
