#pragma once

#include <stdexcept>
#include <string>

namespace bassl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or out-of-range indices in an op.
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed or inconsistent on-disk data (corpus files, checkpoints).
struct DataError : Error {
  using Error::Error;
};

/// Invalid configuration values or unusable argument combinations.
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite values or other numeric failures (undefined cosine, NaN loss).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace bassl
