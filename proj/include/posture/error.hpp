#pragma once

#include <stdexcept>
#include <string>

namespace posture {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid or unsupported configuration value.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input file or a value of the wrong shape/length.
class FormatError : public Error {
public:
  using Error::Error;
};

/// A simulation or training run produced non-finite numbers.
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// Dataset generation could not reach its target within the attempt budget.
class GenerationError : public Error {
public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

} // namespace posture
