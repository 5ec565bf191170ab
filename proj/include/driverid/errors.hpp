#pragma once
#include <stdexcept>
#include <string>

namespace driverid {

// Bad user input: malformed files, schema violations, invalid configs.
// The CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures during an otherwise valid run (I/O, non-finite loss, ...).
// The CLI maps these to exit code 1.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : ValidationError {
  using ValidationError::ValidationError;
};

struct IoError : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

struct NonFiniteLoss : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace driverid
