#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "deskew/preintegration.hpp"
#include "deskew/synthetic.hpp"
#include "test_utils.hpp"

using deskew::AnchorState;
using deskew::consistent_imu_stream;
using deskew::EnvironmentModel;
using deskew::GroundTruthBundle;
using deskew::ImuBias;
using deskew::ImuSample;
using deskew::kStandardGravity;
using deskew::Mat3;
using deskew::SyncPolicy;
using deskew::TrajectorySpec;
using deskew::Vec3;
using deskew::WorldState;
using test_utils::max_entry_diff;

namespace {
constexpr double kG = kStandardGravity;
}

TEST_CASE("stationary synthesis reads gravity only") {
  const auto stream =
      deskew::synthesize_imu(TrajectorySpec::stationary(0.5), 400.0, kG, ImuBias{}, {0.0, 0.0});
  REQUIRE(stream.size() == 201);
  for (const ImuSample& s : stream) {
    CHECK(s.omega_b.norm() == 0.0);
    CHECK((s.a_b - Vec3(0.0, 0.0, -kG)).norm() < 1e-12);
  }
}

TEST_CASE("constant-velocity synthesis matches the stationary readout") {
  const auto stream = deskew::synthesize_imu(
      TrajectorySpec::constant_velocity(Vec3(1.2, -0.3, 0.0), 0.5), 400.0, kG, ImuBias{},
      {0.0, 0.0});
  for (const ImuSample& s : stream) {
    CHECK(s.omega_b.norm() < 1e-12);
    CHECK((s.a_b - Vec3(0.0, 0.0, -kG)).norm() < 1e-10);
  }
}

TEST_CASE("synthesis rejects low rates") {
  CHECK_THROWS_AS(consistent_imu_stream(TrajectorySpec::stationary(1.0), 50.0, kG),
                  deskew::UnsupportedRate);
}

TEST_CASE("figure-eight stream is self-consistent under propagation") {
  const TrajectorySpec spec = TrajectorySpec::figure_eight(0.5, 2.0, 1.0);
  const auto stream = consistent_imu_stream(spec, 400.0, kG);

  const WorldState w0 = deskew::analytic_state(spec, 0.0);
  AnchorState anchor;
  anchor.R_bw = w0.R_wb.transpose();
  anchor.V_b = anchor.R_bw * w0.v;

  const auto seg = deskew::accumulate(stream, ImuBias{});
  const AnchorState end = deskew::propagate_anchor(anchor, seg, kG);

  const double t_end = stream.back().t;
  const WorldState w1 = deskew::analytic_state(spec, t_end);
  CHECK((end.V_b - w1.R_wb.transpose() * w1.v).norm() < 1e-6);
  CHECK(max_entry_diff(end.R_bw, w1.R_wb.transpose()) < 1e-6);
}

TEST_CASE("bias and noise injection") {
  const TrajectorySpec spec = TrajectorySpec::stationary(0.1);
  ImuBias bias;
  bias.b_omega = Vec3(0.01, -0.02, 0.005);
  bias.b_a = Vec3(0.3, 0.0, -0.1);
  const auto clean = consistent_imu_stream(spec, 400.0, kG);
  const auto biased = deskew::synthesize_imu(spec, 400.0, kG, bias, {0.0, 0.0});
  REQUIRE(clean.size() == biased.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK((biased[i].omega_b - clean[i].omega_b - bias.b_omega).norm() < 1e-14);
    CHECK((biased[i].a_b - clean[i].a_b - bias.b_a).norm() < 1e-14);
  }

  // Bias-corrected propagation cancels the injected bias exactly.
  const auto seg_clean = deskew::accumulate(clean, ImuBias{});
  const auto seg_biased = deskew::accumulate(biased, bias);
  CHECK(max_entry_diff(seg_clean.F, seg_biased.F) == 0.0);
}

TEST_CASE("box room ray casting") {
  const EnvironmentModel env = EnvironmentModel::box_room(10.0);
  CHECK(*env.first_hit(Vec3::Zero(), Vec3(1, 0, 0)) == 5.0);
  CHECK(*env.first_hit(Vec3(2, 0, 0), Vec3(1, 0, 0)) == 3.0);
  CHECK(*env.first_hit(Vec3::Zero(), Vec3(-1, 0, 0)) == 5.0);
  const Vec3 diag = Vec3(1, 1, 0).normalized();
  CHECK(std::abs(*env.first_hit(Vec3::Zero(), diag) - 5.0 * std::sqrt(2.0)) < 1e-12);

  EnvironmentModel far_wall;
  far_wall.rects.push_back({0, 8.0, -2.0, 2.0, -2.0, 2.0});
  CHECK(*far_wall.first_hit(Vec3::Zero(), Vec3(1, 0, 0)) == 8.0);
  CHECK(!far_wall.first_hit(Vec3::Zero(), Vec3(-1, 0, 0)).has_value());
  CHECK(!far_wall.first_hit(Vec3::Zero(), Vec3(0, 1, 0)).has_value());
}

TEST_CASE("stationary rendering has no distortion") {
  std::mt19937_64 rng(123);
  auto [sweep, truth] = deskew::render_sweep(TrajectorySpec::stationary(1.0),
                                             EnvironmentModel::box_room(10.0), 0.0, 0.2, 256, 0.0,
                                             SyncPolicy::last_point(), rng);
  REQUIRE(sweep.points.size() == 256);
  REQUIRE(truth.points.size() == 256);
  CHECK((sweep.points[0].P - Vec3(5.0, 0.0, 0.0)).norm() < 1e-12);
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK((sweep.points[i].P - truth.points[i]).norm() < 1e-12);
  }
}

TEST_CASE("constant-velocity rendering displaces early points") {
  std::mt19937_64 rng(127);
  const Vec3 v(1.0, 0.0, 0.0);
  auto [sweep, truth] = deskew::render_sweep(TrajectorySpec::constant_velocity(v, 1.0),
                                             EnvironmentModel::box_room(10.0), 0.0, 0.2, 500, 0.0,
                                             SyncPolicy::last_point(), rng);
  REQUIRE(sweep.points.size() == truth.points.size());
  // For pure translation the sweep-vs-truth displacement of point l is
  // exactly v * (t_sync - t_l): P_l - truth_l = v * (t_sync - t_l).
  const double span = sweep.t_last() - sweep.t_first();
  CHECK((sweep.points[0].P - truth.points[0] - v * span).norm() < 1e-12);
  double max_disp = 0.0;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    max_disp = std::max(max_disp, (truth.points[i] - sweep.points[i].P).norm());
  }
  CHECK(max_disp > 0.15);
  CHECK(max_disp < 0.21);
}

TEST_CASE("rays that miss are dropped from both outputs") {
  std::mt19937_64 rng(131);
  EnvironmentModel wall;
  wall.rects.push_back({0, 6.0, -8.0, 8.0, -8.0, 8.0});  // single wall at x = +6
  auto [sweep, truth] = deskew::render_sweep(TrajectorySpec::stationary(1.0), wall, 0.0, 0.2, 360,
                                             0.0, SyncPolicy::first_point(), rng);
  CHECK(sweep.points.size() == truth.points.size());
  CHECK(sweep.points.size() < 360);
  CHECK(sweep.points.size() > 0);
}

TEST_CASE("piecewise-constant world agrees with the stream at IMU instants") {
  const TrajectorySpec spec = TrajectorySpec::straight_then_turn(1.0, 2.0, 0.05, 0.2);
  const deskew::SwitchedWorld world(spec, 400.0, kG);
  const auto& stream = world.stream();

  // Propagating the body state through the closed-form pre-integration must
  // land exactly on the switched world's states.
  const WorldState w0 = world.state_at(0.0);
  AnchorState anchor;
  anchor.R_bw = w0.R_wb.transpose();
  anchor.V_b = anchor.R_bw * w0.v;
  const std::span<const ImuSample> all(stream);
  for (const std::size_t upto : {std::size_t{10}, std::size_t{41}, stream.size() - 1}) {
    const auto seg = deskew::accumulate(all.subspan(0, upto + 1), ImuBias{});
    const AnchorState end = deskew::propagate_anchor(anchor, seg, kG);
    const WorldState w = world.state_at(stream[upto].t);
    CHECK((end.V_b - w.R_wb.transpose() * w.v).norm() < 1e-10);
    CHECK(max_entry_diff(end.R_bw, w.R_wb.transpose()) < 1e-10);
  }
}

TEST_CASE("bundles are deterministic for a fixed seed") {
  deskew::BundleParams params;
  params.trajectory = TrajectorySpec::figure_eight(0.4, 2.0, 0.4, 99);
  params.rays = 300;
  params.n_sweeps = 2;
  params.gyro_noise_std = 1e-4;
  params.accel_noise_std = 1e-3;
  params.range_noise_std = 1e-3;
  params.seed = 99;

  const GroundTruthBundle a = deskew::generate_bundle(params);
  const GroundTruthBundle b = deskew::generate_bundle(params);
  REQUIRE(a.imu.size() == b.imu.size());
  for (std::size_t i = 0; i < a.imu.size(); ++i) {
    CHECK(a.imu[i].omega_b == b.imu[i].omega_b);
    CHECK(a.imu[i].a_b == b.imu[i].a_b);
  }
  REQUIRE(a.sweeps.size() == b.sweeps.size());
  for (std::size_t m = 0; m < a.sweeps.size(); ++m) {
    REQUIRE(a.sweeps[m].points.size() == b.sweeps[m].points.size());
    for (std::size_t i = 0; i < a.sweeps[m].points.size(); ++i) {
      CHECK(a.sweeps[m].points[i].P == b.sweeps[m].points[i].P);
      CHECK(a.truth_scans[m].points[i] == b.truth_scans[m].points[i]);
    }
  }
}

TEST_CASE("bundle anchors live on the IMU grid") {
  deskew::BundleParams params;
  params.trajectory = TrajectorySpec::constant_velocity(Vec3(0.5, 0, 0), 0.5, 3);
  params.n_sweeps = 2;
  params.rays = 100;
  const GroundTruthBundle bundle = deskew::generate_bundle(params);
  REQUIRE(bundle.anchors.size() == 2);
  CHECK(bundle.anchors[0].t == 0.0);
  CHECK(bundle.anchors[1].t <= bundle.sweeps[1].t_first());
  CHECK((bundle.anchors[0].state.V_b - Vec3(0.5, 0, 0)).norm() < 1e-12);
}
