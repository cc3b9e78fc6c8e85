#pragma once

#include <stdexcept>
#include <string>

namespace cilab {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us data that violates a precondition (shape mismatch,
// empty sample, out-of-range parameter).
class InputError : public Error {
 public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

// A matrix that must be invertible (Gram, second moment) was numerically
// singular and no ridge was available to absorb it.
class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& msg) : Error(msg) {}
};

// Bad key, bad value or missing entry in a config file / CLI request.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File I/O failure (missing file, malformed CSV, unwritable path).
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// A sweep could not produce a usable record set (e.g. every repeat at some
// value diverged).
class SweepError : public Error {
 public:
  explicit SweepError(const std::string& msg) : Error(msg) {}
};

}  // namespace cilab
