#pragma once

#include <Eigen/Core>
#include <cmath>

namespace deskew {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Standard gravity, m/s^2. The world frame carries the gravity vector
/// +g*e3, so a level, stationary accelerometer reads (0, 0, -g).
inline constexpr double kStandardGravity = 9.80665;

inline bool is_finite(const Vec3& v) { return v.allFinite(); }
inline bool is_finite(const Mat3& m) { return m.allFinite(); }

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace deskew
