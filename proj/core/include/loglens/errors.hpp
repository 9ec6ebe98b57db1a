#pragma once

#include <stdexcept>
#include <string>

namespace loglens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An index (class target, event id) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or precondition supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data does not follow the expected file format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File cannot be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training cannot proceed on the given data.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// An object is used before it is in the required state.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace loglens
