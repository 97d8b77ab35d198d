#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "deskew/core.hpp"
#include "deskew/errors.hpp"
#include "deskew/preintegration.hpp"
#include "deskew/so3.hpp"
#include "deskew/sweep_deskew.hpp"

namespace deskew {

/// Analytic ground-truth motions. All are planar; StraightThenTurn is C^1
/// with a deliberate jump in angular rate at switch_time, the regime that
/// breaks the linear-interpolation baseline.
struct TrajectorySpec {
  enum class Kind { Stationary, ConstantVelocity, StraightThenTurn, FigureEight };

  Kind kind = Kind::Stationary;
  double duration = 1.0;
  std::uint64_t seed = 0;

  Vec3 velocity = Vec3::Zero();  // ConstantVelocity
  double speed = 0.0;            // StraightThenTurn, m/s
  double turn_rate = 0.0;        // StraightThenTurn, rad/s
  double switch_time = 0.0;      // StraightThenTurn, s
  double amplitude = 0.0;        // FigureEight, m
  double period = 0.0;           // FigureEight, s

  static TrajectorySpec stationary(double duration, std::uint64_t seed = 0) {
    TrajectorySpec s;
    s.kind = Kind::Stationary;
    s.duration = duration;
    s.seed = seed;
    return s;
  }
  static TrajectorySpec constant_velocity(const Vec3& v, double duration,
                                          std::uint64_t seed = 0) {
    TrajectorySpec s;
    s.kind = Kind::ConstantVelocity;
    s.velocity = v;
    s.duration = duration;
    s.seed = seed;
    return s;
  }
  static TrajectorySpec straight_then_turn(double speed, double turn_rate, double switch_time,
                                           double duration, std::uint64_t seed = 0) {
    TrajectorySpec s;
    s.kind = Kind::StraightThenTurn;
    s.speed = speed;
    s.turn_rate = turn_rate;
    s.switch_time = switch_time;
    s.duration = duration;
    s.seed = seed;
    return s;
  }
  static TrajectorySpec figure_eight(double amplitude, double period, double duration,
                                     std::uint64_t seed = 0) {
    TrajectorySpec s;
    s.kind = Kind::FigureEight;
    s.amplitude = amplitude;
    s.period = period;
    s.duration = duration;
    s.seed = seed;
    return s;
  }
};

/// World-frame kinematic state plus the body rates the IMU would sense.
struct WorldState {
  Vec3 p = Vec3::Zero();         ///< position, m
  Vec3 v = Vec3::Zero();         ///< velocity, m/s
  Vec3 a = Vec3::Zero();         ///< acceleration, m/s^2
  Mat3 R_wb = Mat3::Identity();  ///< body-to-world rotation
  Vec3 omega_b = Vec3::Zero();   ///< body angular velocity, rad/s
};

namespace synth_detail {

inline Mat3 yaw_rotation(double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

}  // namespace synth_detail

inline WorldState analytic_state(const TrajectorySpec& spec, double t) {
  WorldState w;
  switch (spec.kind) {
    case TrajectorySpec::Kind::Stationary:
      break;
    case TrajectorySpec::Kind::ConstantVelocity:
      w.p = spec.velocity * t;
      w.v = spec.velocity;
      break;
    case TrajectorySpec::Kind::StraightThenTurn: {
      const double s = spec.speed;
      const double r = spec.turn_rate;
      if (t < spec.switch_time || r == 0.0) {
        w.p = Vec3(s * t, 0.0, 0.0);
        w.v = Vec3(s, 0.0, 0.0);
      } else {
        const double tau = t - spec.switch_time;
        const double psi = r * tau;
        w.p = Vec3(s * spec.switch_time + (s / r) * std::sin(psi),
                   (s / r) * (1.0 - std::cos(psi)), 0.0);
        w.v = Vec3(s * std::cos(psi), s * std::sin(psi), 0.0);
        w.a = Vec3(-s * r * std::sin(psi), s * r * std::cos(psi), 0.0);
        w.omega_b = Vec3(0.0, 0.0, r);
        w.R_wb = synth_detail::yaw_rotation(psi);
      }
      break;
    }
    case TrajectorySpec::Kind::FigureEight: {
      const double om = 2.0 * M_PI / spec.period;
      const double A = spec.amplitude;
      w.p = Vec3(A * std::sin(om * t), 0.5 * A * std::sin(2.0 * om * t), 0.0);
      w.v = Vec3(A * om * std::cos(om * t), A * om * std::cos(2.0 * om * t), 0.0);
      w.a = Vec3(-A * om * om * std::sin(om * t), -2.0 * A * om * om * std::sin(2.0 * om * t),
                 0.0);
      const double psi = std::atan2(w.v.y(), w.v.x());
      const double speed_sq = w.v.x() * w.v.x() + w.v.y() * w.v.y();
      const double psi_dot = (w.v.x() * w.a.y() - w.v.y() * w.a.x()) / speed_sq;
      w.omega_b = Vec3(0.0, 0.0, psi_dot);
      w.R_wb = synth_detail::yaw_rotation(psi);
      break;
    }
  }
  return w;
}

namespace synth_detail {

/// Per-interval constant (omega, a) that make the switched-system flow land
/// exactly on the analytic state at both interval ends:
///   theta = -Log(R_bw(t1) R_bw(t0)^T),  omega = theta / dt
///   a = J_r(-theta)^-1 (V(t1) - E(-theta)(V(t0) + g dt R_3(t0))) / dt
/// Pointwise sampling would differ from this only at O(dt^2); solving the
/// interval exactly makes feeding the stream back through the pre-integration
/// reproduce the trajectory to round-off for any parameters.
struct IntervalInputs {
  Vec3 omega;
  Vec3 a;
};

inline IntervalInputs consistent_interval(const WorldState& w0, const WorldState& w1, double dt,
                                          double g) {
  const Mat3 r0_bw = w0.R_wb.transpose();
  const Mat3 r1_bw = w1.R_wb.transpose();
  const Mat3 rel = r1_bw * r0_bw.transpose();  // = E(-theta)
  const Eigen::AngleAxisd aa(rel);
  const Vec3 theta = -aa.angle() * aa.axis();

  const Vec3 v0_b = r0_bw * w0.v;
  const Vec3 v1_b = r1_bw * w1.v;
  const Vec3 rhs = v1_b - rel * (v0_b + g * dt * r0_bw.col(2));
  const Mat3 jr_neg = right_jacobian(RotationIncrement(-theta));
  IntervalInputs out;
  out.omega = theta / dt;
  out.a = jr_neg.partialPivLu().solve(rhs) / dt;
  return out;
}

}  // namespace synth_detail

/// Noise-free IMU interval constants for the trajectory, one sample per grid
/// instant k/rate for k = 0..N with N = ceil(duration*rate). Sample k holds
/// the constants of interval [t_k, t_k+1); the final sample carries the
/// pointwise analytic readouts.
inline std::vector<ImuSample> consistent_imu_stream(const TrajectorySpec& spec, double rate,
                                                    double g) {
  if (!(rate >= 100.0)) {
    throw UnsupportedRate("IMU rate must be >= 100 Hz, got " + std::to_string(rate));
  }
  const double dt = 1.0 / rate;
  const auto n = static_cast<std::size_t>(std::ceil(spec.duration * rate - 1e-9));
  std::vector<ImuSample> stream(n + 1);
  WorldState prev = analytic_state(spec, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double t1 = static_cast<double>(k + 1) * dt;
    const WorldState next = analytic_state(spec, t1);
    const synth_detail::IntervalInputs in = synth_detail::consistent_interval(prev, next, t1 - t0, g);
    stream[k] = {t0, in.omega, in.a};
    prev = next;
  }
  const double t_end = static_cast<double>(n) * dt;
  const WorldState w = analytic_state(spec, t_end);
  const Vec3 g_world(0.0, 0.0, g);
  stream[n] = {t_end, w.omega_b, w.R_wb.transpose() * (w.a - g_world)};
  return stream;
}

/// Corrupts a noise-free stream in place: measurement = truth + bias + noise,
/// independent Gaussian per axis, gyro triplet drawn before accel triplet for
/// each sample.
inline void apply_bias_and_noise(std::vector<ImuSample>& stream, const ImuBias& bias,
                                 double gyro_noise_std, double accel_noise_std,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (ImuSample& s : stream) {
    Vec3 ng, na;
    for (int i = 0; i < 3; ++i) ng[i] = gyro_noise_std * unit(rng);
    for (int i = 0; i < 3; ++i) na[i] = accel_noise_std * unit(rng);
    s.omega_b += bias.b_omega + ng;
    s.a_b += bias.b_a + na;
  }
}

/// IMU synthesis as the callers see it: consistent interval constants plus
/// injected bias and noise. Uses spec.seed for the noise draws.
inline std::vector<ImuSample> synthesize_imu(const TrajectorySpec& spec, double rate, double g,
                                             const ImuBias& bias,
                                             std::pair<double, double> noise_std) {
  std::vector<ImuSample> stream = consistent_imu_stream(spec, rate, g);
  std::mt19937_64 rng(spec.seed);
  apply_bias_and_noise(stream, bias, noise_std.first, noise_std.second, rng);
  return stream;
}

/// World poses generated by holding each IMU interval's (omega, a) constant:
/// the trajectory *is* the switched flow, so the discrete point model is
/// exact everywhere on it. Used by the model-exact test mode.
class SwitchedWorld {
 public:
  SwitchedWorld(const TrajectorySpec& spec, double rate, double g)
      : g_world_(0.0, 0.0, g), stream_(consistent_imu_stream(spec, rate, g)) {
    const std::size_t n = stream_.size();
    p_.resize(n);
    v_.resize(n);
    R_wb_.resize(n);
    const WorldState w0 = analytic_state(spec, 0.0);
    p_[0] = w0.p;
    v_[0] = w0.v;
    R_wb_[0] = w0.R_wb;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double dt = stream_[k + 1].t - stream_[k].t;
      step(k, dt, p_[k + 1], v_[k + 1], R_wb_[k + 1]);
    }
  }

  const std::vector<ImuSample>& stream() const { return stream_; }

  WorldState state_at(double t) const {
    auto it = std::upper_bound(stream_.begin(), stream_.end(), t,
                               [](double q, const ImuSample& s) { return q < s.t; });
    const std::size_t k = it == stream_.begin() ? 0 : static_cast<std::size_t>(it - stream_.begin()) - 1;
    const double tau = t - stream_[k].t;
    WorldState w;
    if (tau > 0.0) {
      step(k, tau, w.p, w.v, w.R_wb);
    } else {
      w.p = p_[k];
      w.v = v_[k];
      w.R_wb = R_wb_[k];
    }
    w.omega_b = stream_[k].omega_b;
    w.a = w.R_wb * stream_[k].a_b + g_world_;
    return w;
  }

 private:
  // Exact flow of constant body rates over tau, seeded at sample k:
  //   R_wb(tau) = R_wb E(omega tau)
  //   v(tau)    = v + tau R_wb J_r(omega tau) a_b + tau g_w
  //   p(tau)    = p + tau v + tau^2 R_wb Lambda(omega tau) a_b + (tau^2/2) g_w
  void step(std::size_t k, double tau, Vec3& p_out, Vec3& v_out, Mat3& r_out) const {
    const RotationIncrement theta(stream_[k].omega_b * tau);
    const Vec3& a_b = stream_[k].a_b;
    r_out = R_wb_[k] * exp_so3(theta);
    v_out = v_[k] + tau * (R_wb_[k] * (right_jacobian(theta) * a_b)) + tau * g_world_;
    p_out = p_[k] + tau * v_[k] + tau * tau * (R_wb_[k] * (lambda_kernel(theta) * a_b)) +
            0.5 * tau * tau * g_world_;
  }

  Vec3 g_world_;
  std::vector<ImuSample> stream_;
  std::vector<Vec3> p_;
  std::vector<Vec3> v_;
  std::vector<Mat3> R_wb_;
};

/// Hollow axis-aligned box; rays hit the inside or outside of its shell.
struct AxisAlignedBox {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

/// Finite rectangle on an axis-aligned plane. axis is the fixed coordinate;
/// (u, v) are the remaining axes in increasing order.
struct AxisAlignedRect {
  int axis = 2;
  double offset = 0.0;
  double u_lo = 0.0, u_hi = 0.0;
  double v_lo = 0.0, v_hi = 0.0;
};

struct EnvironmentModel {
  std::vector<AxisAlignedBox> boxes;
  std::vector<AxisAlignedRect> rects;
  double max_range = 100.0;

  static EnvironmentModel box_room(double size, double max_range = 100.0) {
    EnvironmentModel env;
    const double h = 0.5 * size;
    env.boxes.push_back({Vec3(-h, -h, -h), Vec3(h, h, h)});
    env.max_range = max_range;
    return env;
  }

  /// Distance along dir to the nearest surface, if within max_range.
  std::optional<double> first_hit(const Vec3& origin, const Vec3& dir) const {
    constexpr double kEps = 1e-9;
    double best = max_range;
    bool found = false;
    for (const AxisAlignedBox& b : boxes) {
      double t_enter = -std::numeric_limits<double>::infinity();
      double t_exit = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int i = 0; i < 3 && !miss; ++i) {
        if (std::abs(dir[i]) < 1e-15) {
          if (origin[i] < b.lo[i] || origin[i] > b.hi[i]) miss = true;
        } else {
          double t1 = (b.lo[i] - origin[i]) / dir[i];
          double t2 = (b.hi[i] - origin[i]) / dir[i];
          if (t1 > t2) std::swap(t1, t2);
          t_enter = std::max(t_enter, t1);
          t_exit = std::min(t_exit, t2);
        }
      }
      if (miss || t_exit < t_enter) continue;
      const double t = (t_enter > kEps) ? t_enter : t_exit;
      if (t > kEps && t < best) {
        best = t;
        found = true;
      }
    }
    for (const AxisAlignedRect& r : rects) {
      const int u = r.axis == 0 ? 1 : 0;
      const int v = r.axis == 2 ? 1 : 2;
      if (std::abs(dir[r.axis]) < 1e-15) continue;
      const double t = (r.offset - origin[r.axis]) / dir[r.axis];
      if (t <= kEps || t >= best) continue;
      const Vec3 hit = origin + t * dir;
      if (hit[u] >= r.u_lo && hit[u] <= r.u_hi && hit[v] >= r.v_lo && hit[v] <= r.v_hi) {
        best = t;
        found = true;
      }
    }
    if (!found) return std::nullopt;
    return best;
  }
};

/// Per-sweep anchor: the body velocity and orientation at the IMU sample at
/// or before the sweep's first point.
struct SweepAnchor {
  double t = 0.0;
  AnchorState state;
};

struct PoseSample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Mat3 R_wb = Mat3::Identity();
};

struct GroundTruthBundle {
  std::vector<ImuSample> imu;
  std::vector<Sweep> sweeps;
  std::vector<DeskewedSweep> truth_scans;
  std::vector<SweepAnchor> anchors;
  std::vector<PoseSample> pose_log;
};

/// Simulates one revolution of a spinning single-beam rangefinder. Ray l
/// fires at t_start + l * (sweep_duration / rays) at azimuth 2*pi*l/rays in
/// the instantaneous body frame; the hit is recorded in the body frame at
/// that instant (that is the skew). The truth scan holds the same world hit
/// points expressed in the sync-instant body frame; rays that miss are
/// dropped from both outputs.
inline std::pair<Sweep, DeskewedSweep> render_sweep(
    const std::function<WorldState(double)>& pose_at, const EnvironmentModel& env,
    double t_start, double sweep_duration, int rays, double range_noise_std,
    const SyncPolicy& policy, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  const double step = sweep_duration / static_cast<double>(rays);

  Sweep sweep;
  std::vector<Vec3> world_hits;
  for (int l = 0; l < rays; ++l) {
    const double t = t_start + static_cast<double>(l) * step;
    const double az = 2.0 * M_PI * static_cast<double>(l) / static_cast<double>(rays);
    const Vec3 dir_b(std::cos(az), std::sin(az), 0.0);
    const WorldState w = pose_at(t);
    const Vec3 dir_w = w.R_wb * dir_b;
    const std::optional<double> range = env.first_hit(w.p, dir_w);
    const double noise = range_noise_std > 0.0 ? range_noise_std * unit(rng) : 0.0;
    if (!range) continue;  // dropped from both outputs
    sweep.points.push_back({t, (*range + noise) * dir_b});
    world_hits.push_back(w.p + *range * dir_w);
  }
  if (sweep.points.empty()) {
    throw std::invalid_argument("every ray of the sweep missed the environment");
  }

  const std::size_t sync = deskew_detail::resolve_sync_index(policy, sweep.points.size());
  const double t_sync = sweep.points[sync].t;
  const WorldState ws = pose_at(t_sync);
  const Mat3 r_bw_sync = ws.R_wb.transpose();

  DeskewedSweep truth;
  truth.sync_time = t_sync;
  truth.points.resize(world_hits.size());
  for (std::size_t i = 0; i < world_hits.size(); ++i) {
    truth.points[i] = r_bw_sync * (world_hits[i] - ws.p);
  }
  return {std::move(sweep), std::move(truth)};
}

/// Convenience overload rendering from the smooth analytic trajectory.
inline std::pair<Sweep, DeskewedSweep> render_sweep(const TrajectorySpec& spec,
                                                    const EnvironmentModel& env, double t_start,
                                                    double sweep_duration, int rays,
                                                    double range_noise_std,
                                                    const SyncPolicy& policy,
                                                    std::mt19937_64& rng) {
  return render_sweep([&spec](double t) { return analytic_state(spec, t); }, env, t_start,
                      sweep_duration, rays, range_noise_std, policy, rng);
}

enum class ImuMode { Smooth, PiecewiseConstant };

struct BundleParams {
  TrajectorySpec trajectory;
  double imu_rate = 400.0;
  double gravity = kStandardGravity;
  ImuBias bias;
  double gyro_noise_std = 0.0;
  double accel_noise_std = 0.0;
  double range_noise_std = 0.0;
  EnvironmentModel env = EnvironmentModel::box_room(10.0);
  double sweep_duration = 0.2;
  int n_sweeps = 1;
  int rays = 1000;
  SyncPolicy sync_policy = SyncPolicy::last_point();
  ImuMode imu_mode = ImuMode::Smooth;
  std::uint64_t seed = 0;
};

/// Full simulation product: IMU stream (with injected corruption), distorted
/// sweeps, their ground-truth static scans, per-sweep anchors, and a coarse
/// pose log. All randomness flows from params.seed; identical parameters give
/// bit-identical bundles.
inline GroundTruthBundle generate_bundle(const BundleParams& params) {
  const TrajectorySpec& spec = params.trajectory;
  if (!(params.n_sweeps >= 1) || !(params.sweep_duration > 0.0) || !(params.rays >= 1)) {
    throw std::invalid_argument("bundle needs n_sweeps >= 1, sweep_duration > 0, rays >= 1");
  }
  if (static_cast<double>(params.n_sweeps) * params.sweep_duration > spec.duration + 1e-12) {
    throw std::invalid_argument("sweeps do not fit inside the trajectory duration");
  }

  GroundTruthBundle bundle;
  std::optional<SwitchedWorld> switched;
  std::function<WorldState(double)> pose_at;
  if (params.imu_mode == ImuMode::PiecewiseConstant) {
    switched.emplace(spec, params.imu_rate, params.gravity);
    bundle.imu = switched->stream();
    pose_at = [&sw = *switched](double t) { return sw.state_at(t); };
  } else {
    bundle.imu = consistent_imu_stream(spec, params.imu_rate, params.gravity);
    pose_at = [&spec](double t) { return analytic_state(spec, t); };
  }

  std::mt19937_64 rng(params.seed);
  apply_bias_and_noise(bundle.imu, params.bias, params.gyro_noise_std, params.accel_noise_std,
                       rng);

  for (int m = 0; m < params.n_sweeps; ++m) {
    const double t_start = static_cast<double>(m) * params.sweep_duration;
    auto [sweep, truth] = render_sweep(pose_at, params.env, t_start, params.sweep_duration,
                                       params.rays, params.range_noise_std, params.sync_policy,
                                       rng);
    sweep.index = m;
    truth.index = m;

    const std::size_t i0 = deskew_detail::sample_at_or_before(bundle.imu, sweep.t_first());
    const double t_anchor = bundle.imu[i0].t;
    const WorldState w = pose_at(t_anchor);
    SweepAnchor anchor;
    anchor.t = t_anchor;
    anchor.state.R_bw = w.R_wb.transpose();
    anchor.state.V_b = anchor.state.R_bw * w.v;

    bundle.sweeps.push_back(std::move(sweep));
    bundle.truth_scans.push_back(std::move(truth));
    bundle.anchors.push_back(anchor);
  }

  const double log_dt = 0.01;
  for (double t = 0.0; t <= spec.duration + 1e-12; t += log_dt) {
    const WorldState w = pose_at(std::min(t, spec.duration));
    bundle.pose_log.push_back({t, w.p, w.R_wb});
  }
  return bundle;
}

}  // namespace deskew
