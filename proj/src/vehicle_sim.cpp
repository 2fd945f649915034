// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/vehicle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sortie::sim {

bool VehicleParams::valid() const {
  return mass_kg > 0 && inertia_diag.minCoeff() > 0 && arm_length_m > 0 &&
         thrust_coeff > 0 && yaw_torque_coeff > 0 && motor_time_constant_s > 0 &&
         max_motor_thrust_n > 0 && drag_coeff >= 0;
}

double battery_open_circuit_voltage(const BatteryParams& p, double charge) {
  charge = std::clamp(charge, 0.0, 1.0);
  // Discharge-curve knots as fractions of the usable voltage span; shaped like
  // a LiPo curve with a flat middle and a steep knee near empty.
  static constexpr double kC[] = {0.0, 0.10, 0.25, 0.90, 1.0};
  static constexpr double kF[] = {0.0, 0.185, 0.444, 0.889, 1.0};
  double frac = 1.0;
  for (int i = 1; i < 5; ++i) {
    if (charge <= kC[i]) {
      const double t = (charge - kC[i - 1]) / (kC[i] - kC[i - 1]);
      frac = kF[i - 1] + t * (kF[i] - kF[i - 1]);
      break;
    }
  }
  return p.v_empty + frac * (p.v_full - p.v_empty);
}

BatteryState battery_step(const BatteryState& b, const BatteryParams& p,
                          double power_draw_w, double dt) {
  if (dt <= 0.0) {
    throw std::invalid_argument("battery_step: dt must be positive");
  }
  BatteryState out = b;
  switch (b.mode) {
    case BatteryMode::kDischarging:
      out.charge -= power_draw_w * dt / (3600.0 * p.capacity_wh);
      break;
    case BatteryMode::kCharging:
      out.charge += dt / p.charge_time_full_s;
      break;
    case BatteryMode::kIdle:
      break;
  }
  out.charge = std::clamp(out.charge, 0.0, 1.0);
  double v = battery_open_circuit_voltage(p, out.charge);
  if (b.mode == BatteryMode::kDischarging) {
    v -= p.load_sag_v * (power_draw_w / p.hover_power_w);
  } else if (b.mode == BatteryMode::kCharging) {
    v += 0.5 * p.load_sag_v;
  }
  out.voltage = std::clamp(v, p.v_empty, p.v_full + p.load_sag_v);
  return out;
}

WindSim::WindSim(const WindModel& model, std::uint64_t seed)
    : model_(model), rng_(seed) {
  wind_ = model_.mean;
}

Vec3 WindSim::step(double dt) {
  const double tau = std::max(model_.correlation_time_s, 1e-3);
  const double decay = std::exp(-dt / tau);
  const double excite = std::sqrt(1.0 - decay * decay);
  for (int i = 0; i < 3; ++i) {
    gust_[i] = decay * gust_[i] + excite * model_.gust_stddev[i] * gauss_(rng_);
  }
  wind_ = model_.mean + gust_;
  return wind_;
}

MotorPoint motor_calibration_map(const VehicleParams& p, double cmd, bool* clamped) {
  const bool out_of_range = cmd < 0.0 || cmd > 1.0;
  if (clamped != nullptr) {
    *clamped = out_of_range;
  }
  cmd = std::clamp(cmd, 0.0, 1.0);
  const double w_max = std::sqrt(p.max_motor_thrust_n / p.thrust_coeff);
  MotorPoint m;
  m.speed_rad_s = cmd * w_max;
  m.thrust_n = p.thrust_coeff * m.speed_rad_s * m.speed_rad_s;
  return m;
}

double motor_inverse_map(const VehicleParams& p, double thrust_n) {
  thrust_n = std::clamp(thrust_n, 0.0, p.max_motor_thrust_n);
  return std::sqrt(thrust_n / p.max_motor_thrust_n);
}

// Quad-X geometry. Motor order: 0 front-right, 1 back-left, 2 front-left,
// 3 back-right; 0 and 1 spin opposite to 2 and 3.
Eigen::Matrix4d allocation_matrix(const VehicleParams& p) {
  const double l = p.arm_length_m / std::sqrt(2.0);
  const double k = p.yaw_moment_per_thrust();
  Eigen::Matrix4d a;
  a << 1, 1, 1, 1,
      -l, l, l, -l,
      -l, l, -l, l,
      -k, -k, k, k;
  return a;
}

Eigen::Matrix4d allocation_inverse(const VehicleParams& p) {
  const double l = p.arm_length_m / std::sqrt(2.0);
  const double k = p.yaw_moment_per_thrust();
  Eigen::Matrix4d inv;
  inv << 1, -1 / l, -1 / l, -1 / k,
         1, 1 / l, 1 / l, -1 / k,
         1, 1 / l, -1 / l, 1 / k,
         1, -1 / l, 1 / l, 1 / k;
  return 0.25 * inv;
}

namespace {

struct StateDeriv {
  Vec3 dp, dv;
  Vec4 dq;
  Vec3 domega;
  std::array<double, 4> dw;
};

struct PlantInput {
  std::array<double, 4> speed_targets;
  Vec3 wind;
  const VehicleParams* params;
  const std::array<double, 4>* thrust_scale;
};

StateDeriv derivative(const TrueVehicleState& s, const PlantInput& in) {
  const VehicleParams& p = *in.params;
  const double l = p.arm_length_m / std::sqrt(2.0);
  const double k = p.yaw_moment_per_thrust();

  std::array<double, 4> f{};
  for (int i = 0; i < 4; ++i) {
    f[i] = p.thrust_coeff * s.motor_speeds[i] * s.motor_speeds[i];
  }
  const double thrust = f[0] + f[1] + f[2] + f[3];
  const Vec3 torque(l * (-f[0] + f[1] + f[2] - f[3]),
                    l * (-f[0] + f[1] - f[2] + f[3]),
                    k * (-f[0] - f[1] + f[2] + f[3]));

  const Mat3 c = s.attitude.toRotationMatrix();
  const Vec3 force_w = c.col(2) * thrust + p.mass_kg * kGravityW -
                       p.drag_coeff * (s.velocity - in.wind);

  StateDeriv d;
  d.dp = s.velocity;
  d.dv = force_w / p.mass_kg;

  const Quat omega_q(0.0, s.body_rates.x(), s.body_rates.y(), s.body_rates.z());
  const Quat qdot = s.attitude * omega_q;
  d.dq = 0.5 * Vec4(qdot.w(), qdot.x(), qdot.y(), qdot.z());

  const Vec3 j = p.inertia_diag;
  const Vec3 jw(j.x() * s.body_rates.x(), j.y() * s.body_rates.y(), j.z() * s.body_rates.z());
  const Vec3 ang_acc = (torque - s.body_rates.cross(jw)).cwiseQuotient(j);
  d.domega = ang_acc;

  for (int i = 0; i < 4; ++i) {
    d.dw[i] = (in.speed_targets[i] - s.motor_speeds[i]) / p.motor_time_constant_s;
  }
  return d;
}

TrueVehicleState advance(const TrueVehicleState& s, const StateDeriv& d, double h) {
  TrueVehicleState out = s;
  out.position += h * d.dp;
  out.velocity += h * d.dv;
  Vec4 q(s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z());
  q += h * d.dq;
  out.attitude = Quat(q[0], q[1], q[2], q[3]);
  out.body_rates += h * d.domega;
  for (int i = 0; i < 4; ++i) {
    out.motor_speeds[i] += h * d.dw[i];
  }
  return out;
}

bool finite(const TrueVehicleState& s, const std::array<double, 4>& cmds) {
  for (double c : cmds) {
    if (!std::isfinite(c)) return false;
  }
  for (double w : s.motor_speeds) {
    if (!std::isfinite(w)) return false;
  }
  return s.position.allFinite() && s.velocity.allFinite() &&
         s.body_rates.allFinite() && std::isfinite(s.attitude.norm());
}

}  // namespace

TrueVehicleState step_dynamics(const TrueVehicleState& state,
                               const std::array<double, 4>& motor_cmds_n,
                               const Vec3& wind, const VehicleParams& params,
                               double dt,
                               const std::array<double, 4>& motor_thrust_scale) {
  if (!finite(state, motor_cmds_n) || !wind.allFinite()) {
    throw std::domain_error("step_dynamics: non-finite input");
  }
  if (!(dt > 0.0 && dt <= 0.01)) {
    throw std::invalid_argument("step_dynamics: dt outside (0, 0.01]");
  }

  PlantInput in;
  in.wind = wind;
  in.params = &params;
  in.thrust_scale = &motor_thrust_scale;
  for (int i = 0; i < 4; ++i) {
    const double cmd = std::clamp(motor_cmds_n[i], 0.0, params.max_motor_thrust_n);
    // A derated motor reaches a proportionally lower speed for the same command.
    in.speed_targets[i] =
        motor_thrust_scale[i] * std::sqrt(cmd / params.thrust_coeff);
  }

  if (state.on_ground) {
    // Only the motors spool while the vehicle sits on the surface; contact
    // release is decided in pad_contact().
    TrueVehicleState out = state;
    for (int i = 0; i < 4; ++i) {
      const double dw = (in.speed_targets[i] - out.motor_speeds[i]);
      out.motor_speeds[i] += dw * (1.0 - std::exp(-dt / params.motor_time_constant_s));
      out.motor_speeds[i] = std::max(out.motor_speeds[i], 0.0);
    }
    out.velocity.setZero();
    out.body_rates.setZero();
    out.accel_world.setZero();
    out.time_s += dt;
    return out;
  }

  const StateDeriv k1 = derivative(state, in);
  const StateDeriv k2 = derivative(advance(state, k1, 0.5 * dt), in);
  const StateDeriv k3 = derivative(advance(state, k2, 0.5 * dt), in);
  const StateDeriv k4 = derivative(advance(state, k3, dt), in);

  TrueVehicleState out = state;
  out.position += dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.velocity += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  Vec4 q(state.attitude.w(), state.attitude.x(), state.attitude.y(), state.attitude.z());
  q += dt / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  q.normalize();
  out.attitude = Quat(q[0], q[1], q[2], q[3]);
  out.body_rates += dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  for (int i = 0; i < 4; ++i) {
    out.motor_speeds[i] += dt / 6.0 * (k1.dw[i] + 2.0 * k2.dw[i] + 2.0 * k3.dw[i] + k4.dw[i]);
    out.motor_speeds[i] = std::max(out.motor_speeds[i], 0.0);
  }
  out.accel_world = (out.velocity - state.velocity) / dt;
  out.time_s += dt;
  return out;
}

TrueVehicleState pad_contact(const TrueVehicleState& state, const PadPose& pad,
                             const VehicleParams& params) {
  TrueVehicleState out = state;
  double thrust = 0.0;
  for (double w : state.motor_speeds) {
    thrust += params.thrust_coeff * w * w;
  }

  if (state.on_ground) {
    if (thrust > params.hover_thrust()) {
      out.on_ground = false;
    }
    return out;
  }

  const bool over_pad = pad.contains(Vec2(state.position.x(), state.position.y()));
  const double surface = over_pad ? pad.surface_height_m : 0.0;
  if (state.position.z() <= surface && state.velocity.z() <= 0.0) {
    out.position.z() = surface;
    out.velocity.setZero();
    out.body_rates.setZero();
    out.accel_world.setZero();
    out.on_ground = true;
  }
  return out;
}

}  // namespace sortie::sim
