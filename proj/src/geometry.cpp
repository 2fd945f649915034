// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace sortie {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Mat3 quat_to_rotmat(const Quat& q) {
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw std::invalid_argument("quat_to_rotmat: quaternion is not unit norm");
  }
  return q.toRotationMatrix();
}

Quat apply_small_angle(const Quat& q, const Vec3& dtheta) {
  Quat dq(1.0, 0.5 * dtheta.x(), 0.5 * dtheta.y(), 0.5 * dtheta.z());
  Quat out = q * dq;
  out.normalize();
  return out;
}

Quat quat_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    q.normalize();
    return q;
  }
  const Vec3 axis = rotvec / angle;
  const double half = 0.5 * angle;
  const double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

Quat quat_from_yaw(double yaw) {
  return Quat(std::cos(0.5 * yaw), 0.0, 0.0, std::sin(0.5 * yaw));
}

double yaw_of(const Quat& q) {
  const Mat3 c = q.toRotationMatrix();
  // Heading of the body x axis projected to the horizontal plane.
  return std::atan2(c(1, 0), c(0, 0));
}

Quat normalized(const Quat& q) {
  Quat out = q;
  out.normalize();
  if (out.w() < 0.0) {
    out.coeffs() = -out.coeffs();
  }
  return out;
}

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) {
    a += 2.0 * M_PI;
  }
  return a - M_PI;
}

}  // namespace sortie
