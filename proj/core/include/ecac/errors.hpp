#pragma once

#include <stdexcept>
#include <string>

namespace ecac {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A computation produced NaN/Inf, or a gradient handed to the optimizer was non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointVersionError : public IoError {
 public:
  using IoError::IoError;
};

class UnsupportedProbeError : public Error {
 public:
  using Error::Error;
};

// Environment used out of protocol (e.g. step after episode end).
class EnvStateError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecac
