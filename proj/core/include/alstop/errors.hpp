#pragma once

#include <stdexcept>
#include <string>

namespace alstop {

/// Invalid configuration or precondition violation (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing or malformed input data (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure, e.g. a factorization that cannot be stabilized
/// (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace alstop
