// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/trajectory_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sortie::traj {

namespace {

// Rest-to-rest smoothstep with zero velocity/acceleration/jerk/snap at both
// ends: s(0)=0, s(1)=1, s'..s'''' = 0 at the boundaries.
constexpr std::array<double, 10> kRestToRest{0, 0, 0, 0, 0, 126, -420, 540, -315, 70};
// Quintic smoothstep for yaw (zero rate and acceleration at the ends).
constexpr std::array<double, 6> kYawStep{0, 0, 0, 10, -15, 6};

template <std::size_t N>
double eval_poly(const std::array<double, N>& c, double tau, int order) {
  double acc = 0.0;
  for (int k = static_cast<int>(N) - 1; k >= order; --k) {
    double fac = 1.0;
    for (int j = 0; j < order; ++j) {
      fac *= static_cast<double>(k - j);
    }
    acc = acc * tau + fac * c[static_cast<std::size_t>(k)];
  }
  return acc;
}

}  // namespace

Vec3 PolySegment::eval(double t, int order) const {
  const double T = duration_s;
  const double tau = std::clamp(t / T, 0.0, 1.0);
  const double scale = std::pow(1.0 / T, order);
  return Vec3(eval_poly(pos_coeffs[0], tau, order), eval_poly(pos_coeffs[1], tau, order),
              eval_poly(pos_coeffs[2], tau, order)) *
         scale;
}

double PolySegment::eval_yaw(double t, int order) const {
  const double T = duration_s;
  const double tau = std::clamp(t / T, 0.0, 1.0);
  return eval_poly(yaw_coeffs, tau, order) * std::pow(1.0 / T, order);
}

double PolyTrajectory::total_duration() const {
  double total = 0.0;
  for (const auto& s : segments) {
    total += s.duration_s;
  }
  return total;
}

std::pair<int, double> PolyTrajectory::locate(double t) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (t <= acc + segments[i].duration_s || i + 1 == segments.size()) {
      return {static_cast<int>(i), std::clamp(t - acc, 0.0, segments[i].duration_s)};
    }
    acc += segments[i].duration_s;
  }
  return {0, 0.0};
}

namespace {

PolySegment make_hover(const Waypoint& wp) {
  PolySegment seg;
  seg.duration_s = wp.hover_time_s;
  seg.is_hover = true;
  seg.action = wp.action;
  for (int a = 0; a < 3; ++a) {
    seg.pos_coeffs[a][0] = wp.position[a];
  }
  seg.yaw_coeffs[0] = wp.yaw_rad;
  return seg;
}

PolySegment make_move(const Vec3& p0, double yaw0, const Vec3& p1, double yaw1,
                      const TrajectoryLimits& lim) {
  const Vec3 delta = p1 - p0;
  const double dist = delta.norm();
  const double t_vel = kPeakSpeedFactor * dist / lim.v_max;
  const double t_acc = std::sqrt(kPeakAccelFactor * dist / lim.a_max);
  PolySegment seg;
  seg.duration_s = std::max({t_vel, t_acc, 0.1});
  for (int a = 0; a < 3; ++a) {
    seg.pos_coeffs[a][0] = p0[a];
    for (int k = 5; k <= 9; ++k) {
      seg.pos_coeffs[a][static_cast<std::size_t>(k)] = kRestToRest[static_cast<std::size_t>(k)] * delta[a];
    }
  }
  seg.yaw_coeffs[0] = yaw0;
  for (int k = 3; k <= 5; ++k) {
    seg.yaw_coeffs[static_cast<std::size_t>(k)] = kYawStep[static_cast<std::size_t>(k)] * (yaw1 - yaw0);
  }
  return seg;
}

}  // namespace

PolyTrajectory plan_mission_trajectory(const std::vector<Waypoint>& waypoints,
                                       const TrajectoryLimits& limits) {
  if (waypoints.size() < 2) {
    throw std::invalid_argument("plan_mission_trajectory: need at least 2 waypoints");
  }
  for (const auto& wp : waypoints) {
    if (!wp.position.allFinite() || !std::isfinite(wp.yaw_rad) || wp.hover_time_s < 0.0) {
      throw std::invalid_argument("plan_mission_trajectory: non-finite waypoint");
    }
  }

  // Unwrapped yaw targets keep segments continuous across +-pi.
  std::vector<double> yaw(waypoints.size());
  yaw[0] = waypoints[0].yaw_rad;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    yaw[i] = yaw[i - 1] + wrap_angle(waypoints[i].yaw_rad - waypoints[i - 1].yaw_rad);
  }

  PolyTrajectory traj;
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    const Waypoint& wp = waypoints[i];
    if (wp.hover_time_s > 0.0 || wp.action != WaypointAction::kNone) {
      Waypoint hov = wp;
      hov.hover_time_s = std::max(wp.hover_time_s, 0.5);
      hov.yaw_rad = yaw[i];
      traj.segments.push_back(make_hover(hov));
    }
    if (i + 1 < waypoints.size()) {
      const Waypoint& next = waypoints[i + 1];
      if ((next.position - wp.position).norm() < 1e-9) {
        throw std::invalid_argument("plan_mission_trajectory: coincident consecutive waypoints");
      }
      traj.segments.push_back(make_move(wp.position, yaw[i], next.position, yaw[i + 1], limits));
    }
  }
  return traj;
}

Mat3 attitude_from_flat(const Vec3& thrust_vec_w, double psi) {
  Vec3 b3 = thrust_vec_w;
  const double norm = b3.norm();
  if (norm < 1e-9) {
    b3 = Vec3(0, 0, 1);
  } else {
    b3 /= norm;
  }
  const Vec3 x_c(std::cos(psi), std::sin(psi), 0.0);
  Vec3 b2 = b3.cross(x_c);
  const double n = b2.norm();
  if (n < 1e-9) {
    // Thrust parallel to the heading: fall back to yaw-only attitude.
    b2 = Vec3(-std::sin(psi), std::cos(psi), 0.0);
  } else {
    b2 /= n;
  }
  const Vec3 b1 = b2.cross(b3);
  Mat3 r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b3;
  return r;
}

Vec3 body_rates_from_flat(const Vec3& a_ff, const Vec3& jerk, double psi, double psi_dot) {
  const Vec3 thrust = a_ff - kGravityW;  // specific thrust demand
  const double t_mag = thrust.norm();
  if (t_mag < 1e-9) {
    return Vec3(0, 0, psi_dot);
  }
  const Mat3 r = attitude_from_flat(thrust, psi);
  const Vec3 b1 = r.col(0), b2 = r.col(1), b3 = r.col(2);
  const Vec3 x_c(std::cos(psi), std::sin(psi), 0.0);
  const Vec3 e3(0, 0, 1);

  const double w1 = -b2.dot(jerk) / t_mag;
  const double w2 = b1.dot(jerk) / t_mag;
  const double xb1 = x_c.dot(b1);
  if (std::abs(xb1) < 1e-9) {
    return Vec3(w1, w2, psi_dot);
  }
  const double w3 =
      (psi_dot * (xb1 * e3.dot(b3) - x_c.dot(b3) * e3.dot(b1)) + x_c.dot(b3) * w1) / xb1;
  return Vec3(w1, w2, w3);
}

FlatSample sample_trajectory(const PolyTrajectory& traj, double t, bool* clamped) {
  const double total = traj.total_duration();
  bool was_clamped = false;
  if (t < 0.0) {
    t = 0.0;
    was_clamped = true;
  } else if (t > total) {
    t = total;
    was_clamped = true;
  }
  if (clamped != nullptr) {
    *clamped = was_clamped;
  }

  const auto [idx, local_t] = traj.locate(t);
  const PolySegment& seg = traj.segments[static_cast<std::size_t>(idx)];
  FlatSample out;
  out.p_ref = seg.eval(local_t, 0);
  out.v_ref = seg.eval(local_t, 1);
  out.a_ff = seg.eval(local_t, 2);
  out.psi_ref = seg.eval_yaw(local_t, 0);
  if (seg.is_hover) {
    out.omega_ff.setZero();
  } else {
    out.omega_ff = body_rates_from_flat(out.a_ff, seg.eval(local_t, 3), out.psi_ref,
                                        seg.eval_yaw(local_t, 1));
  }
  return out;
}

double VerticalProfile::total_time() const {
  return terminal_ramp ? 2.0 * t_ramp + t_plateau : t_ramp + t_plateau;
}

std::pair<double, double> VerticalProfile::sample(double t) const {
  const double v = direction * v_peak;
  if (t <= 0.0) {
    return {z0, 0.0};
  }
  if (t <= t_ramp) {
    const double vel = v * t / t_ramp;
    return {z0 + 0.5 * vel * t, vel};
  }
  const double z_ramp = z0 + 0.5 * v * t_ramp;
  if (!terminal_ramp || t <= t_ramp + t_plateau) {
    return {z_ramp + v * (t - t_ramp), v};
  }
  const double z_plateau = z_ramp + v * t_plateau;
  const double u = (t - t_ramp - t_plateau) / t_ramp;
  if (u >= 1.0) {
    return {z_plateau + 0.5 * v * t_ramp, 0.0};
  }
  return {z_plateau + v * t_ramp * (u - 0.5 * u * u), v * (1.0 - u)};
}

VerticalProfile plan_vertical_velocity_profile(double z0, double z1, double v_nominal,
                                               double t_ramp, bool terminal_ramp) {
  if (z0 == z1) {
    throw std::invalid_argument("plan_vertical_velocity_profile: z0 == z1");
  }
  if (v_nominal <= 0.0) {
    throw std::invalid_argument("plan_vertical_velocity_profile: v_nominal must be positive");
  }
  VerticalProfile p;
  p.z0 = z0;
  p.direction = (z1 > z0) ? 1.0 : -1.0;
  p.t_ramp = t_ramp;
  p.terminal_ramp = terminal_ramp;
  const double dist = std::abs(z1 - z0);
  const double ramp_span = terminal_ramp ? t_ramp : 0.5 * t_ramp;
  if (dist < v_nominal * ramp_span) {
    p.v_peak = dist / ramp_span;
    p.t_plateau = 0.0;
  } else {
    p.v_peak = v_nominal;
    p.t_plateau = dist / v_nominal - ramp_span;
  }
  return p;
}

}  // namespace sortie::traj
