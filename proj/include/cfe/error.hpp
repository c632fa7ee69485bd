#pragma once

#include <stdexcept>
#include <string>

namespace cfe {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Clip/grid/tensor shapes do not line up. Usually means the caller has to
// resize or re-sample before retrying.
struct DimensionError : Error {
  using Error::Error;
};

// A container, stream or config document could not be parsed.
struct FormatError : Error {
  using Error::Error;
};

// Bad parameter combination (e.g. quarter rotation on a non-square SB).
struct ConfigError : Error {
  using Error::Error;
};

// An optional external dependency (codec binary) is not available.
struct FeatureUnavailable : Error {
  using Error::Error;
};

}  // namespace cfe
