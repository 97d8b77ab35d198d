#pragma once

#include <stdexcept>
#include <string>

namespace deskew {

/// Non-positive or otherwise unusable integration interval, or a rotation
/// increment outside the representable axis-angle range.
struct InvalidInterval : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Timestamps in a stream are not strictly increasing.
struct NonMonotoneTimestamps : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The IMU stream does not span the sweep it is asked to correct.
struct ImuCoverageGap : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two point sets that must correspond index-to-index have different sizes.
struct CardinalityMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// IMU rate below the supported minimum.
struct UnsupportedRate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed run configuration (message carries file:line).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed data file (message carries the record number).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace deskew
