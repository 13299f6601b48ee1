#pragma once

#include <stdexcept>
#include <string>

namespace sim2real {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions between rasters, masks or tensors.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value, unknown config key or inverted range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during training or loss evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage could not run (missing predecessor, bad input).
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace sim2real
