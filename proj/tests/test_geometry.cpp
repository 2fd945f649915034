// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sortie/geometry.hpp"

using namespace sortie;

namespace {

// Independent Rodrigues-formula oracle: R = I + sin(a) K + (1-cos(a)) K^2.
Mat3 rodrigues(const Vec3& axis, double angle) {
  const Mat3 k = skew(axis.normalized());
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

Quat random_quat(std::mt19937& rng) {
  std::normal_distribution<double> g;
  Quat q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q;
}

}  // namespace

TEST_CASE("skew matrix matches the cross product") {
  const Mat3 m = skew(Vec3(1, 2, 3));
  Mat3 expected;
  expected << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  CHECK((m - expected).norm() == doctest::Approx(0.0));

  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    const Vec3 a(g(rng), g(rng), g(rng)), b(g(rng), g(rng), g(rng));
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-14);
    CHECK((skew(a) * a).norm() < 1e-14);
    // antisymmetry of the operator
    CHECK((skew(a) * b + skew(b) * a).norm() < 1e-13);
  }

  CHECK((skew(Vec3(0, 0, 1)) * Vec3(0.1, 0, 0) - Vec3(0, 0.1, 0)).norm() < 1e-15);
}

TEST_CASE("quat_to_rotmat basics") {
  CHECK((quat_to_rotmat(Quat::Identity()) - Mat3::Identity()).norm() < 1e-15);

  const Quat yaw90 = quat_from_yaw(M_PI / 2);
  CHECK((quat_to_rotmat(yaw90) * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);

  CHECK_THROWS_AS(quat_to_rotmat(Quat(2.0, 0, 0, 0)), std::invalid_argument);
}

TEST_CASE("quat_to_rotmat agrees with the Rodrigues oracle") {
  std::mt19937 rng(42);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, M_PI);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double angle = u(rng);
    const Quat q(Eigen::AngleAxisd(angle, axis));
    CHECK((quat_to_rotmat(q) - rodrigues(axis, angle)).norm() < 1e-12);
  }
}

TEST_CASE("rotation matrices are orthonormal and double-covered") {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Quat q = random_quat(rng);
    const Mat3 c = quat_to_rotmat(q);
    CHECK((c * c.transpose() - Mat3::Identity()).norm() < 1e-12);
    CHECK(c.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    const Quat neg(-q.w(), -q.x(), -q.y(), -q.z());
    CHECK((quat_to_rotmat(neg) - c).norm() < 1e-13);
  }
}

TEST_CASE("apply_small_angle") {
  const Quat id = Quat::Identity();
  CHECK(apply_small_angle(id, Vec3::Zero()).angularDistance(id) < 1e-15);

  const double eps = 1e-4;
  const Quat dq = apply_small_angle(id, Vec3(0, 0, eps));
  CHECK(std::abs(yaw_of(dq) - eps) < eps * eps * eps);

  // Composition consistency against the exact axis-angle exponential.
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    const Quat q = random_quat(rng);
    const Vec3 dtheta = 0.01 * Vec3(g(rng), g(rng), g(rng)).normalized();
    const Quat exact = q * Quat(Eigen::AngleAxisd(dtheta.norm(), dtheta.normalized()));
    CHECK(apply_small_angle(q, dtheta).angularDistance(exact) < 1e-6);
    CHECK(std::abs(apply_small_angle(q, dtheta).norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("quat_exp matches AngleAxis") {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    Vec3 v(g(rng), g(rng), g(rng));
    const Quat q = quat_exp(v);
    const Quat ref(Eigen::AngleAxisd(v.norm(), v.normalized()));
    CHECK(q.angularDistance(ref) < 1e-12);
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
  }
  CHECK(quat_exp(Vec3::Zero()).angularDistance(Quat::Identity()) < 1e-15);
}

TEST_CASE("wrap_angle and yaw extraction") {
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(wrap_angle(3 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-3 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(2 * M_PI + 0.25) == doctest::Approx(0.25));

  for (double yaw : {-2.5, -0.3, 0.0, 0.7, 3.0}) {
    CHECK(yaw_of(quat_from_yaw(yaw)) == doctest::Approx(wrap_angle(yaw)).epsilon(1e-12));
  }
}

TEST_CASE("pose composition and inverse") {
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    Pose a{random_quat(rng), Vec3(g(rng), g(rng), g(rng))};
    Pose b{random_quat(rng), Vec3(g(rng), g(rng), g(rng))};
    const Vec3 x(g(rng), g(rng), g(rng));
    CHECK(((a * b).apply(x) - a.apply(b.apply(x))).norm() < 1e-12);
    CHECK((a.inverse().apply(a.apply(x)) - x).norm() < 1e-12);
  }
}
