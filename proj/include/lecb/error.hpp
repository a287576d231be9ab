#pragma once

#include <stdexcept>
#include <string>

namespace lecb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or dimensionality mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument supplied by the caller.
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (non-finite values, singular systems, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace lecb
