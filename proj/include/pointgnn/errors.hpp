#pragma once

#include <stdexcept>
#include <string>

namespace pgnn {

// Precondition violated by the caller.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input data (files, byte buffers, text records).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss/gradient or other unrecoverable training state.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic scene placement could not be satisfied.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pgnn
