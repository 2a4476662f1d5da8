#pragma once

#include <stdexcept>
#include <string>

namespace timescale {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rejected input: bad dimensions, negative variances, inconsistent shapes.
struct InvalidParameterError : Error {
  using Error::Error;
};

/// Arithmetic breakdown: singular innovation, indefinite covariance, overflow.
struct NumericalError : Error {
  using Error::Error;
};

/// Malformed or incomplete scenario configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Missing or unreadable/unwritable files.
struct IoError : Error {
  using Error::Error;
};

}  // namespace timescale
