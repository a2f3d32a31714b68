#ifndef CIRN_ERRORS_HPP
#define CIRN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cirn {

// Shape/width mismatches between tensors.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint / serialized artifact problems.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite math is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cirn

#endif
