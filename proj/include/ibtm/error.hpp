#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ibtm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record; `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Lookup of a label, path or key that does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// Numeric breakdown during training (NaN/Inf).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible binary container.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ibtm
