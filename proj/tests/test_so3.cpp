#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "deskew/so3.hpp"
#include "test_utils.hpp"

using deskew::exp_so3;
using deskew::lambda_kernel;
using deskew::Mat3;
using deskew::right_jacobian;
using deskew::RotationIncrement;
using deskew::skew;
using deskew::upsilon;
using deskew::Vec3;
using test_utils::max_entry_diff;

TEST_CASE("skew operator") {
  CHECK(skew(Vec3::Zero()).isZero(0.0));

  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK(max_entry_diff(skew(Vec3(1, 2, 3)), expected) == 0.0);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w = test_utils::random_vec(rng, 5.0);
    const Vec3 v = test_utils::random_vec(rng, 5.0);
    CHECK((skew(w) * w).norm() == 0.0);
    CHECK((skew(w) * v - w.cross(v)).norm() < 1e-14);
    CHECK(max_entry_diff(skew(w).transpose(), -skew(w)) == 0.0);
  }
}

TEST_CASE("rotation increment validation") {
  CHECK_NOTHROW(RotationIncrement(Vec3(3.1, 0, 0)));
  CHECK_THROWS_AS(RotationIncrement(Vec3(M_PI, 0, 0)), deskew::InvalidInterval);
  CHECK_THROWS_AS(RotationIncrement(Vec3(4.0, 0, 0)), deskew::InvalidInterval);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(RotationIncrement(Vec3(nan, 0, 0)), deskew::InvalidInterval);
}

TEST_CASE("exp_so3 values") {
  CHECK(max_entry_diff(exp_so3(RotationIncrement(Vec3::Zero())), Mat3::Identity()) == 0.0);

  Mat3 quarter_x;
  quarter_x << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK(max_entry_diff(exp_so3(RotationIncrement(Vec3(M_PI / 2, 0, 0))), quarter_x) < 1e-15);

  // Tiny increments against a four-term Taylor expansion.
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const Vec3 theta = 1e-9 * test_utils::random_unit(rng);
    const Mat3 x = skew(theta);
    const Mat3 taylor = Mat3::Identity() + x + x * x / 2.0 + x * x * x / 6.0;
    CHECK(max_entry_diff(exp_so3(RotationIncrement(theta)), taylor) < 1e-15);
  }
}

TEST_CASE("exp_so3 is a rotation") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    const Vec3 theta = test_utils::random_theta(rng, 1e-10, 3.0);
    const Mat3 e = exp_so3(RotationIncrement(theta));
    CHECK(max_entry_diff(e * e.transpose(), Mat3::Identity()) < 1e-13);
    CHECK(std::abs(e.determinant() - 1.0) < 1e-13);
    CHECK(max_entry_diff(exp_so3(RotationIncrement(-theta)), e.transpose()) < 1e-15);
  }
}

TEST_CASE("right_jacobian") {
  CHECK(max_entry_diff(right_jacobian(RotationIncrement(Vec3::Zero())), Mat3::Identity()) == 0.0);

  // E(theta) J_r(-theta) = J_r(theta)
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const RotationIncrement inc(test_utils::random_theta(rng, 1e-10, 3.0));
    const Mat3 lhs = exp_so3(inc) * right_jacobian(inc.negated());
    worst = std::max(worst, max_entry_diff(lhs, right_jacobian(inc)));
  }
  CHECK(worst < 1e-12);

  const Vec3 theta(0.3, -0.2, 0.1);
  CHECK(max_entry_diff(right_jacobian(RotationIncrement(theta)),
                       test_utils::series_right_jacobian(theta)) < 1e-14);
}

TEST_CASE("upsilon") {
  CHECK(max_entry_diff(upsilon(RotationIncrement(Vec3::Zero())), 0.5 * Mat3::Identity()) == 0.0);

  const Vec3 theta(0.3, -0.2, 0.1);
  CHECK(max_entry_diff(upsilon(RotationIncrement(theta)), test_utils::series_upsilon(theta)) <
        1e-14);

  // Linear coefficient at small angles: the antisymmetric part is
  // exactly a(x) * theta^, which must sit at theta^/3 to high accuracy.
  const Vec3 small = 1e-4 * Vec3(0.36, -0.48, 0.8);
  const Mat3 u = upsilon(RotationIncrement(small));
  const Mat3 antisym = 0.5 * (u - u.transpose());
  const Mat3 linear = skew(small) / 3.0;
  CHECK(max_entry_diff(antisym, linear) / linear.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lambda_kernel") {
  CHECK(max_entry_diff(lambda_kernel(RotationIncrement(Vec3::Zero())), 0.5 * Mat3::Identity()) ==
        0.0);

  // E(theta) Upsilon(-theta) = Lambda(theta)
  std::mt19937_64 rng(19);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const RotationIncrement inc(test_utils::random_theta(rng, 1e-10, 3.0));
    const Mat3 lhs = exp_so3(inc) * upsilon(inc.negated());
    worst = std::max(worst, max_entry_diff(lhs, lambda_kernel(inc)));
  }
  CHECK(worst < 1e-12);

  const Vec3 small = 1e-4 * Vec3(0.6, 0.64, -0.48);
  const Mat3 lam = lambda_kernel(RotationIncrement(small));
  const Mat3 antisym = 0.5 * (lam - lam.transpose());
  const Mat3 linear = skew(small) / 6.0;
  CHECK(max_entry_diff(antisym, linear) / linear.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("kernels are seamless across the series switch") {
  const double threshold = deskew::so3_detail::kSeriesSwitch;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    const Vec3 dir = test_utils::random_unit(rng);
    for (const double scale : {1.0 - 1e-3, 1.0 + 1e-3}) {
      const Vec3 theta = threshold * scale * dir;
      const RotationIncrement inc(theta);
      CHECK(max_entry_diff(exp_so3(inc), test_utils::series_exp(theta)) < 1e-12);
      CHECK(max_entry_diff(right_jacobian(inc), test_utils::series_right_jacobian(theta)) <
            1e-12);
      CHECK(max_entry_diff(upsilon(inc), test_utils::series_upsilon(theta)) < 1e-12);
      CHECK(max_entry_diff(lambda_kernel(inc), test_utils::series_lambda(theta)) < 1e-12);
    }
  }
}
