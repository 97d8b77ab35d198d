#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "deskew/core.hpp"
#include "deskew/errors.hpp"
#include "deskew/so3.hpp"

namespace deskew {

/// One row of the IMU stream, already rotated into the LiDAR frame.
/// Extrinsic rotation happens at ingestion; this type never sees raw
/// IMU-frame readouts.
struct ImuSample {
  double t = 0.0;      ///< stream time, s
  Vec3 omega_b = Vec3::Zero();  ///< body angular velocity, rad/s
  Vec3 a_b = Vec3::Zero();      ///< body specific force, m/s^2
};

/// Constant accelerometer/gyroscope biases over a segment.
struct ImuBias {
  Vec3 b_a = Vec3::Zero();
  Vec3 b_omega = Vec3::Zero();
};

/// Body velocity and world-to-body rotation at a segment's start instant.
/// The third column of R_bw is the body-frame direction of world +z, which
/// carries gravity.
struct AnchorState {
  Vec3 V_b = Vec3::Zero();
  Mat3 R_bw = Mat3::Identity();
};

/// Anchor-independent accumulation of a span of IMU intervals:
///   F        product of per-interval rotation increments E(theta(k))
///   mu_b     sum of F(i,k) J_r(theta(k)) a(k) dt(k)
///   zeta_raw sum of F(i,k) Lambda(theta(k)) a(k) dt(k)^2 + mu_b(i,k) dt(k)
///   elapsed  sum of dt(k)
/// The anchor-dependent velocity/gravity terms are assembled later in
/// finalize_transform, so one accumulation serves any candidate anchor.
struct PreintegratedSegment {
  Mat3 F = Mat3::Identity();
  Vec3 mu_b = Vec3::Zero();
  Vec3 zeta_raw = Vec3::Zero();
  double elapsed = 0.0;
  std::size_t count = 0;
};

/// Rotation+translation pair; applied as p -> rotation * p + translation.
/// A finalized segment stores (F^T, t) so that P(j) = F^T P(i) + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Composition: (a * b) applies b first, then a.
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  }
};

inline RigidTransform invert(const RigidTransform& t) {
  Mat3 rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

struct PointState {
  Vec3 P = Vec3::Zero();
  Vec3 V = Vec3::Zero();
  Mat3 R_bw = Mat3::Identity();
};

namespace preint_detail {

// Repeated rotation products drift off the manifold; project back when the
// max deviation of R^T R from identity exceeds this.
inline constexpr double kOrthoDriftLimit = 1e-9;

inline void renormalize_if_drifted(Mat3& r) {
  if (max_abs(r.transpose() * r - Mat3::Identity()) > kOrthoDriftLimit) {
    r = project_to_rotation(r);
  }
}

// Folds one constant-input interval into the running accumulation.
// omega and a are already bias-corrected.
inline void fold_interval(PreintegratedSegment& seg, const Vec3& omega, const Vec3& a, double dt) {
  if (!(dt > 0.0)) {
    throw InvalidInterval("IMU interval must be positive, got " + std::to_string(dt));
  }
  if (!is_finite(omega) || !is_finite(a)) {
    throw InvalidInterval("non-finite IMU values");
  }
  const RotationIncrement theta(omega * dt);
  const Vec3 v_hat = a * dt;
  const Vec3 p_hat = v_hat * dt;
  seg.zeta_raw += seg.F * (lambda_kernel(theta) * p_hat) + seg.mu_b * dt;
  seg.mu_b += seg.F * (right_jacobian(theta) * v_hat);
  seg.elapsed += dt;
  seg.F = seg.F * exp_so3(theta);
  renormalize_if_drifted(seg.F);
  seg.count += 1;
}

}  // namespace preint_detail

/// Propagates a static point's body-frame coordinates, the body velocity and
/// the world-to-body rotation across one IMU interval of length dt with
/// constant bias-corrected inputs:
///   P' = E(-theta) (P - dt V - (g/2) dt^2 R_3) - Upsilon(-theta) a dt^2
///   V' = E(-theta) (V + g dt R_3) + J_r(-theta) a dt
///   R' = E(-theta) R
inline PointState step_point(const Vec3& P, const Vec3& V, const Mat3& R_bw,
                             const ImuSample& sample, const ImuBias& bias, double dt, double g) {
  if (!(dt > 0.0)) {
    throw InvalidInterval("step_point needs dt > 0, got " + std::to_string(dt));
  }
  const Vec3 omega = sample.omega_b - bias.b_omega;
  const Vec3 a = sample.a_b - bias.b_a;
  const RotationIncrement theta(omega * dt);
  const RotationIncrement theta_neg = theta.negated();
  const Mat3 e_neg = exp_so3(theta_neg);
  const Vec3 r3 = R_bw.col(2);

  PointState out;
  out.P = e_neg * (P - dt * V - 0.5 * g * dt * dt * r3) - upsilon(theta_neg) * (a * dt * dt);
  out.V = e_neg * (V + g * dt * r3) + right_jacobian(theta_neg) * (a * dt);
  out.R_bw = e_neg * R_bw;
  return out;
}

/// One-pass accumulation over consecutive sample pairs. n samples define
/// n-1 intervals; each interval takes its own dt = t(k+1) - t(k) and holds
/// sample k's inputs constant. Empty and single-sample spans yield the
/// identity segment.
inline PreintegratedSegment accumulate(std::span<const ImuSample> samples, const ImuBias& bias) {
  PreintegratedSegment seg;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double dt = samples[k + 1].t - samples[k].t;
    if (!(dt > 0.0)) {
      throw NonMonotoneTimestamps("IMU timestamps must be strictly increasing at sample " +
                                  std::to_string(k + 1));
    }
    preint_detail::fold_interval(seg, samples[k].omega_b - bias.b_omega,
                                 samples[k].a_b - bias.b_a, dt);
  }
  return seg;
}

/// Single pseudo-interval of length dt driven by one sample's inputs. Used
/// for the per-interval prefix pass and for fractional partial steps.
inline PreintegratedSegment integrate_single_interval(const ImuSample& sample, double dt,
                                                      const ImuBias& bias) {
  PreintegratedSegment seg;
  if (dt > 0.0) {
    preint_detail::fold_interval(seg, sample.omega_b - bias.b_omega, sample.a_b - bias.b_a, dt);
  } else if (dt < 0.0) {
    throw InvalidInterval("negative interval " + std::to_string(dt));
  }
  return seg;
}

/// Assembles the rigid transform realizing P(j) = F^T P(i) + t over the
/// segment, given the anchor state at the segment start:
///   chi = elapsed * V_b(i) + (g/2) elapsed^2 R_3(i)
///   t   = -F^T (chi + zeta_raw)
inline RigidTransform finalize_transform(const PreintegratedSegment& seg,
                                         const AnchorState& anchor, double g) {
  const Vec3 chi = seg.elapsed * anchor.V_b +
                   0.5 * g * seg.elapsed * seg.elapsed * anchor.R_bw.col(2);
  const Mat3 ft = seg.F.transpose();
  return {ft, -(ft * (chi + seg.zeta_raw))};
}

/// Advances the anchor to the segment end:
///   V_b(j)  = F^T (V_b(i) + g elapsed R_3(i) + mu_b)
///   R_bw(j) = F^T R_bw(i)
inline AnchorState propagate_anchor(const AnchorState& anchor, const PreintegratedSegment& seg,
                                    double g) {
  AnchorState out;
  const Mat3 ft = seg.F.transpose();
  out.V_b = ft * (anchor.V_b + g * seg.elapsed * anchor.R_bw.col(2) + seg.mu_b);
  out.R_bw = ft * anchor.R_bw;
  preint_detail::renormalize_if_drifted(out.R_bw);
  return out;
}

}  // namespace deskew
