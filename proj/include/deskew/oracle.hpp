#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "deskew/core.hpp"
#include "deskew/errors.hpp"
#include "deskew/preintegration.hpp"

namespace deskew {

/// Brute-force ground truth for the closed-form machinery. Everything here
/// integrates the raw 15-dimensional linear ODE
///   dP = -omega x P - V
///   dV = -omega x V + g R_3 + a
///   dR = -omega^ R
/// directly, or sums/quadratures series, and deliberately shares no code with
/// the Rodrigues-form kernels it validates. Orders of magnitude slower than
/// the closed form; that asymmetry is the point.

struct ContinuousState {
  Vec3 P = Vec3::Zero();
  Vec3 V = Vec3::Zero();
  Mat3 R_bw = Mat3::Identity();
};

namespace oracle_detail {

struct Derivative {
  Vec3 dP;
  Vec3 dV;
  Mat3 dR;
};

inline Derivative rhs(const ContinuousState& s, const Vec3& omega, const Vec3& a, double g) {
  Derivative d;
  d.dP = -omega.cross(s.P) - s.V;
  d.dV = -omega.cross(s.V) + g * s.R_bw.col(2) + a;
  d.dR.col(0) = -omega.cross(Vec3(s.R_bw.col(0)));
  d.dR.col(1) = -omega.cross(Vec3(s.R_bw.col(1)));
  d.dR.col(2) = -omega.cross(Vec3(s.R_bw.col(2)));
  return d;
}

inline ContinuousState advance(const ContinuousState& s, const Derivative& d, double h) {
  return {s.P + h * d.dP, s.V + h * d.dV, s.R_bw + h * d.dR};
}

inline ContinuousState rk4_step(const ContinuousState& s, const Vec3& omega, const Vec3& a,
                                double g, double h) {
  const Derivative k1 = rhs(s, omega, a, g);
  const Derivative k2 = rhs(advance(s, k1, 0.5 * h), omega, a, g);
  const Derivative k3 = rhs(advance(s, k2, 0.5 * h), omega, a, g);
  const Derivative k4 = rhs(advance(s, k3, h), omega, a, g);
  ContinuousState out;
  out.P = s.P + (h / 6.0) * (k1.dP + 2.0 * k2.dP + 2.0 * k3.dP + k4.dP);
  out.V = s.V + (h / 6.0) * (k1.dV + 2.0 * k2.dV + 2.0 * k3.dV + k4.dV);
  out.R_bw = s.R_bw + (h / 6.0) * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR);
  return out;
}

// Gram-Schmidt on the columns; kept distinct from the SVD projection the
// closed-form side uses.
inline void orthonormalize_columns(Mat3& r) {
  Vec3 c0 = r.col(0).normalized();
  Vec3 c1 = (r.col(1) - c0 * c0.dot(r.col(1))).normalized();
  Vec3 c2 = c0.cross(c1);
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c2;
}

// Matrix exponential by plain term-by-term series summation.
inline Mat3 expm_series(const Mat3& a) {
  Mat3 sum = Mat3::Identity();
  Mat3 term = Mat3::Identity();
  for (int n = 1; n <= 80; ++n) {
    term = (term * a) / static_cast<double>(n);
    sum += term;
    if (max_abs(term) < 1e-18) break;
  }
  return sum;
}

inline Mat3 cross_matrix(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

}  // namespace oracle_detail

/// Classical fixed-substep RK4 over [0, duration] with constant inputs.
/// Local truncation O(substep^5); a trailing partial step absorbs any
/// remainder. No manifold projection inside.
inline ContinuousState rk4_propagate(const ContinuousState& state, const Vec3& omega_b,
                                     const Vec3& a_b, double g, double duration, double substep) {
  if (!(substep > 0.0) || !(duration >= 0.0) || substep > duration + 1e-15) {
    throw InvalidInterval("rk4_propagate needs 0 < substep <= duration");
  }
  ContinuousState s = state;
  const auto n_full = static_cast<long long>(duration / substep);
  for (long long i = 0; i < n_full; ++i) {
    s = oracle_detail::rk4_step(s, omega_b, a_b, g, substep);
  }
  const double rem = duration - static_cast<double>(n_full) * substep;
  if (rem > 1e-15 * duration) {
    s = oracle_detail::rk4_step(s, omega_b, a_b, g, rem);
  }
  return s;
}

/// Switched-system ground truth: RK4 per IMU interval with that interval's
/// constant bias-corrected inputs, columns re-orthonormalized once per
/// interval.
inline ContinuousState rk4_switched(const ContinuousState& state,
                                    std::span<const ImuSample> samples, const ImuBias& bias,
                                    double g, double substep) {
  ContinuousState s = state;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double dt = samples[k + 1].t - samples[k].t;
    if (!(dt > 0.0)) {
      throw NonMonotoneTimestamps("IMU timestamps must be strictly increasing at sample " +
                                  std::to_string(k + 1));
    }
    s = rk4_propagate(s, samples[k].omega_b - bias.b_omega, samples[k].a_b - bias.b_a, g, dt,
                      std::min(substep, dt));
    oracle_detail::orthonormalize_columns(s.R_bw);
  }
  return s;
}

/// Double time-integral of the rotation kernel over the interval, normalized
/// by varsigma^2:
///   (1/vs^2) * integral_0^vs integral_0^tau Exp(omega (vs - u)) du dtau
/// evaluated by cumulative composite Simpson in both variables, with the
/// integrand's exponential summed as a series. Analytically this equals
/// upsilon(omega * vs); it is the weight with which constant acceleration
/// reaches position through the rotating frame.
inline Mat3 quadrature_forcing(const Vec3& omega_b, double varsigma, int nodes) {
  if (!(varsigma > 0.0)) {
    throw InvalidInterval("quadrature_forcing needs varsigma > 0");
  }
  int n = std::max(nodes, 8);
  n = ((n + 3) / 4) * 4;  // multiple of 4 so both Simpson levels get even panel counts
  const double h = varsigma / n;
  const Mat3 w = oracle_detail::cross_matrix(omega_b);

  // Inner integrals I(u_i) = integral_0^{u_i} Exp(omega (vs - u)) du at even i.
  std::vector<Mat3> inner(static_cast<std::size_t>(n / 2) + 1);
  inner[0] = Mat3::Zero();
  Mat3 g_prev = oracle_detail::expm_series(w * varsigma);
  for (int i = 0; i + 2 <= n; i += 2) {
    const Mat3 g_mid = oracle_detail::expm_series(w * (varsigma - (i + 1) * h));
    const Mat3 g_next = oracle_detail::expm_series(w * (varsigma - (i + 2) * h));
    inner[i / 2 + 1] = inner[i / 2] + (h / 3.0) * (g_prev + 4.0 * g_mid + g_next);
    g_prev = g_next;
  }

  // Outer Simpson over tau on the even-index grid (step 2h, n/2 panels).
  const int m = n / 2;
  Mat3 total = inner[0] + inner[static_cast<std::size_t>(m)];
  for (int j = 1; j < m; ++j) {
    total += (j % 2 == 1 ? 4.0 : 2.0) * inner[static_cast<std::size_t>(j)];
  }
  total *= (2.0 * h) / 3.0;
  return total / (varsigma * varsigma);
}

}  // namespace deskew
