#pragma once

#include <stdexcept>
#include <string>

namespace popsyn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

// Operation called out of order (e.g. backward before forward).
struct StateError : Error {
  using Error::Error;
};

struct EncodingError : Error {
  using Error::Error;
};

struct SplitError : Error {
  using Error::Error;
};

// Input data or configuration rejected; CLI exit code 1.
struct ValidationError : Error {
  using Error::Error;
};

struct UsageError : ValidationError {
  using ValidationError::ValidationError;
};

// Filesystem failures; CLI exit code 2.
struct IoError : Error {
  using Error::Error;
};

// Non-finite loss during training.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace popsyn
