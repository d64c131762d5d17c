#pragma once

#include <stdexcept>
#include <string>

namespace interfere {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Constraints admit no solution (e.g. capacity too small for all units).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for an exhaustive or quadratic routine.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Requested configuration falls outside what a routine supports.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace interfere
