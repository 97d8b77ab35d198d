#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "deskew/core.hpp"
#include "deskew/errors.hpp"

namespace deskew {

/// Integrated body angular increment over one IMU interval, theta = omega * dt.
///
/// Construction rejects non-finite input and ||theta|| >= pi: one interval of a
/// >=100 Hz stream cannot plausibly cover half a turn, so larger values signal
/// corrupt data, and the axis-angle parameterization wraps beyond pi.
class RotationIncrement {
 public:
  explicit RotationIncrement(const Vec3& theta) : theta_(theta), angle_(theta.norm()) {
    if (!is_finite(theta) || !(angle_ < M_PI)) {
      throw InvalidInterval("rotation increment must be finite with norm < pi, got norm " +
                            std::to_string(angle_));
    }
  }

  const Vec3& vector() const { return theta_; }
  double angle() const { return angle_; }

  RotationIncrement negated() const {
    RotationIncrement r(*this);
    r.theta_ = -r.theta_;
    return r;
  }

 private:
  Vec3 theta_;
  double angle_;
};

/// skew(w) * v == w x v for all v; skew(w)^T == -skew(w).
inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return m;
}

namespace so3_detail {

// Every kernel below is I*c0 + a(x)*theta^ + b(x)*(theta^)^2 with scalar
// coefficient functions of x = ||theta||. The closed forms lose up to
// ~eps/x^2 per matrix entry near x = 0 (the 1-cos style numerators round at
// the magnitude of cos itself), so below kSeriesSwitch the coefficients are
// evaluated by their even Taylor series through x^6. At the switch point both
// branches agree to ~1e-14 entrywise; closed-form entry error at x >= 0.1
// stays below ~1e-14 as well.
inline constexpr double kSeriesSwitch = 0.1;

struct Coeffs {
  double a;
  double b;
};

inline Coeffs exp_coeffs(double x) {
  if (x < kSeriesSwitch) {
    const double x2 = x * x;
    return {1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0)),
            0.5 - x2 / 24.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0))};
  }
  const double s = std::sin(x);
  const double c = std::cos(x);
  return {s / x, (1.0 - c) / (x * x)};
}

inline Coeffs right_jacobian_coeffs(double x) {
  if (x < kSeriesSwitch) {
    const double x2 = x * x;
    return {0.5 - x2 / 24.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0)),
            1.0 / 6.0 - x2 / 120.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0))};
  }
  const double s = std::sin(x);
  const double c = std::cos(x);
  const double x2 = x * x;
  return {(1.0 - c) / x2, (x - s) / (x2 * x)};
}

inline Coeffs upsilon_coeffs(double x) {
  if (x < kSeriesSwitch) {
    const double x2 = x * x;
    return {1.0 / 3.0 - x2 / 30.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)),
            0.125 - x2 / 144.0 * (1.0 - x2 / 40.0 * (1.0 - x2 / 70.0))};
  }
  const double s = std::sin(x);
  const double c = std::cos(x);
  const double x2 = x * x;
  return {(s - x * c) / (x2 * x), (1.0 - c + 0.5 * x2 - x * s) / (x2 * x2)};
}

inline Coeffs lambda_coeffs(double x) {
  if (x < kSeriesSwitch) {
    const double x2 = x * x;
    return {1.0 / 6.0 - x2 / 120.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)),
            1.0 / 24.0 - x2 / 720.0 * (1.0 - x2 / 56.0 * (1.0 - x2 / 90.0))};
  }
  const double s = std::sin(x);
  const double c = std::cos(x);
  const double x2 = x * x;
  // The identity E(theta)*Upsilon(-theta) fixes the quadratic coefficient at
  // (cos x - 1 + x^2/2)/x^4, whose small-x limit is 1/24.
  return {(x - s) / (x2 * x), (c - 1.0 + 0.5 * x2) / (x2 * x2)};
}

inline Mat3 assemble(double c0, const Coeffs& c, const Vec3& theta) {
  const Mat3 w = skew(theta);
  return c0 * Mat3::Identity() + c.a * w + c.b * (w * w);
}

}  // namespace so3_detail

/// Rodrigues exponential E(theta): the rotation by angle ||theta|| about
/// theta/||theta||. E*E^T = I, det E = 1, E(-theta) = E(theta)^T.
inline Mat3 exp_so3(const RotationIncrement& inc) {
  return so3_detail::assemble(1.0, so3_detail::exp_coeffs(inc.angle()), inc.vector());
}

/// J_r(theta) = I + (1-cos x)/x^2 theta^ + (x-sin x)/x^3 (theta^)^2,
/// x = ||theta||. Realizes the once-integrated rotation kernel:
/// integral_0^1 E(theta*u) du. Satisfies E(theta) J_r(-theta) = J_r(theta).
inline Mat3 right_jacobian(const RotationIncrement& inc) {
  return so3_detail::assemble(1.0, so3_detail::right_jacobian_coeffs(inc.angle()), inc.vector());
}

/// Upsilon(theta) = I/2 + (sin x - x cos x)/x^3 theta^
///                + (1 - cos x + x^2/2 - x sin x)/x^4 (theta^)^2.
/// Realizes the twice-integrated rotation kernel integral_0^1 u E(theta*u) du,
/// the position-row forcing weight of the discrete point model.
inline Mat3 upsilon(const RotationIncrement& inc) {
  return so3_detail::assemble(0.5, so3_detail::upsilon_coeffs(inc.angle()), inc.vector());
}

/// Lambda(theta) = E(theta) * Upsilon(-theta) = J_r(theta) - Upsilon(theta),
/// the forcing weight after pulling one rotation through the accumulated
/// product. Computed from its own closed form, not the product.
inline Mat3 lambda_kernel(const RotationIncrement& inc) {
  return so3_detail::assemble(0.5, so3_detail::lambda_coeffs(inc.angle()), inc.vector());
}

/// Nearest rotation matrix in the Frobenius sense (SVD projection).
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace deskew
