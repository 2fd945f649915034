// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "sortie/geometry.hpp"

namespace sortie::traj {

enum class WaypointAction { kNone, kAcquireData };

struct Waypoint {
  Vec3 position{0, 0, 0};
  double yaw_rad = 0.0;
  double hover_time_s = 0.0;
  WaypointAction action = WaypointAction::kNone;
};

// Reference tuple consumed by the translation controller.
struct FlatSample {
  Vec3 p_ref{0, 0, 0};
  Vec3 v_ref{0, 0, 0};
  Vec3 a_ff{0, 0, 0};
  double psi_ref = 0.0;
  Vec3 omega_ff{0, 0, 0};
};

// One fully-constrained segment: degree-9 position polynomials (per axis) and
// a quintic yaw polynomial, both over normalized time.
struct PolySegment {
  std::array<std::array<double, 10>, 3> pos_coeffs{};  // x, y, z
  std::array<double, 6> yaw_coeffs{};
  double duration_s = 0.0;
  bool is_hover = false;
  WaypointAction action = WaypointAction::kNone;

  // derivative order 0..4 of the position at local time t
  Vec3 eval(double t, int order) const;
  double eval_yaw(double t, int order) const;
};

struct PolyTrajectory {
  std::vector<PolySegment> segments;
  double total_duration() const;
  // Segment index and local time for a trajectory time (clamped).
  std::pair<int, double> locate(double t) const;
};

struct TrajectoryLimits {
  double v_max = 4.0;   // m/s
  double a_max = 3.0;   // m/s^2
};

// Peak speed of the rest-to-rest profile is 315/128 * d / T; peak acceleration
// is kPeakAccelFactor * d / T^2.
inline constexpr double kPeakSpeedFactor = 315.0 / 128.0;
inline constexpr double kPeakAccelFactor = 9.372886;

// Converts a waypoint list into rest-to-rest degree-9 segments with hover
// segments inserted for positive hover times. Throws std::invalid_argument on
// fewer than 2 waypoints, coincident consecutive waypoints or non-finite input.
PolyTrajectory plan_mission_trajectory(const std::vector<Waypoint>& waypoints,
                                       const TrajectoryLimits& limits);

// Samples position/velocity/acceleration and flatness-derived feed-forward
// body rates. Out-of-range times clamp to the nearest endpoint; *clamped is
// set when provided.
FlatSample sample_trajectory(const PolyTrajectory& traj, double t, bool* clamped = nullptr);

// Body rates implied by (a_ff + g, psi, psi_dot) and the jerk, via the
// thrust-direction map. Exposed for the flight controller's attitude
// construction as well.
Mat3 attitude_from_flat(const Vec3& thrust_vec_w, double psi);
Vec3 body_rates_from_flat(const Vec3& a_ff, const Vec3& jerk, double psi, double psi_dot);

// Trapezoidal vertical-velocity profile. Landing profiles have no terminal
// ramp: the plateau velocity holds until an external touchdown decision.
struct VerticalProfile {
  double z0 = 0.0;
  double direction = 1.0;  // +1 up, -1 down
  double v_peak = 1.0;     // m/s, plateau magnitude
  double t_ramp = 0.5;
  double t_plateau = 0.0;  // ignored when terminal_ramp is false
  bool terminal_ramp = true;

  double total_time() const;
  // (z_ref, vz_ref) at time t from profile start
  std::pair<double, double> sample(double t) const;
};

VerticalProfile plan_vertical_velocity_profile(double z0, double z1, double v_nominal,
                                               double t_ramp = 0.5,
                                               bool terminal_ramp = true);

}  // namespace sortie::traj
