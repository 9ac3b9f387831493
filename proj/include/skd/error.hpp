#pragma once

#include <stdexcept>
#include <string>

namespace skd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatch, out-of-range index, or a value outside its domain.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Exhaustive enumeration requested over an output space above the guard.
class OracleTooLarge : public Error {
 public:
  using Error::Error;
};

// Malformed text input. `line()` is 1-based, or 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  // Same error with `prefix` (typically the file path) prepended.
  ParseError(const std::string& prefix, const ParseError& inner)
      : Error(prefix + ": " + inner.what()), line_(inner.line_) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

// The score cache on disk was built from different data or a different teacher.
class StaleCache : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A configuration field failed validation; the message names the field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace skd
