// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace sortie {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

// Conventions used throughout the stack (stated once, used everywhere):
//  - Quaternions are Hamilton, scalar-first. q_wi rotates body-frame vectors
//    into the world frame: v_w = C(q_wi) * v_b.
//  - World frame is East-North-Up, body frame is Forward-Left-Up.
inline constexpr double kGravityMss = 9.80665;
inline const Vec3 kGravityW{0.0, 0.0, -kGravityMss};

// Cross-product matrix: skew(v) * u == v x u.
Mat3 skew(const Vec3& v);

// Rotation matrix from a unit quaternion. Throws std::invalid_argument if the
// quaternion norm is off unit by more than 1e-6.
Mat3 quat_to_rotmat(const Quat& q);

// Right-multiplicative small-angle correction: q (x) [1, dtheta/2], renormalized.
Quat apply_small_angle(const Quat& q, const Vec3& dtheta);

// Exact quaternion exponential of a rotation vector (axis * angle).
Quat quat_exp(const Vec3& rotvec);

// Unit quaternion for a pure yaw rotation about world z.
Quat quat_from_yaw(double yaw);

// Yaw (heading) extracted from a body-to-world quaternion.
double yaw_of(const Quat& q);

// Normalized quaternion with positive scalar part.
Quat normalized(const Quat& q);

// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

// Rigid transform, rotation then translation: x_out = R * x_in + t.
struct Pose {
  Quat rotation{1, 0, 0, 0};
  Vec3 translation{0, 0, 0};

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Pose inverse() const {
    Quat qi = rotation.conjugate();
    return Pose{qi, -(qi * translation)};
  }
  Pose operator*(const Pose& rhs) const {
    return Pose{normalized(rotation * rhs.rotation), rotation * rhs.translation + translation};
  }
};

}  // namespace sortie
