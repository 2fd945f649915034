// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <random>

#include "sortie/geometry.hpp"

namespace sortie::sim {

struct VehicleParams {
  double mass_kg = 1.5;
  Vec3 inertia_diag{0.021, 0.021, 0.038};  // kg m^2
  double arm_length_m = 0.22;
  double thrust_coeff = 8.0e-6;       // N / (rad/s)^2
  double yaw_torque_coeff = 1.28e-7;  // N m / (rad/s)^2
  double motor_time_constant_s = 0.04;
  double max_motor_thrust_n = 8.0;
  double drag_coeff = 0.25;  // N / (m/s), linear, relative to air mass

  double hover_thrust() const { return mass_kg * kGravityMss; }
  // Reactive yaw torque per newton of motor thrust.
  double yaw_moment_per_thrust() const { return yaw_torque_coeff / thrust_coeff; }
  bool valid() const;
};

// Square charging platform; surface is horizontal at surface_height_m.
struct PadPose {
  Vec2 center{0.0, 0.0};
  double surface_height_m = 0.0;
  double yaw_rad = 0.0;
  double size_m = 0.9;

  bool contains(const Vec2& xy) const {
    const Vec2 d = xy - center;
    const double c = std::cos(yaw_rad), s = std::sin(yaw_rad);
    const double u = c * d.x() + s * d.y();
    const double v = -s * d.x() + c * d.y();
    const double h = 0.5 * size_m;
    return std::abs(u) <= h && std::abs(v) <= h;
  }
};

struct TrueVehicleState {
  Vec3 position{0, 0, 0};   // world, m
  Vec3 velocity{0, 0, 0};   // world, m/s
  Quat attitude{1, 0, 0, 0};  // body -> world
  Vec3 body_rates{0, 0, 0};   // rad/s
  std::array<double, 4> motor_speeds{0, 0, 0, 0};  // rad/s
  bool on_ground = true;
  double time_s = 0.0;

  // Acceleration realized on the last dynamics step (world frame, gravity
  // included); the sensor model derives specific force from it.
  Vec3 accel_world{0, 0, 0};
};

enum class BatteryMode { kDischarging, kCharging, kIdle };

struct BatteryParams {
  double v_full = 12.6;
  double v_empty = 9.9;
  double capacity_wh = 48.0;      // sized for 16 min hover endurance
  double hover_power_w = 180.0;
  double charge_time_full_s = 2400.0;  // 40 min empty-to-full
  double load_sag_v = 0.25;            // sag at hover power
  double return_home_voltage = 10.8;
  double critical_voltage = 10.2;
};

struct BatteryState {
  double voltage = 12.6;
  double charge = 1.0;  // fraction of capacity
  BatteryMode mode = BatteryMode::kIdle;
};

// Open-circuit voltage from the piecewise-linear discharge curve.
double battery_open_circuit_voltage(const BatteryParams& p, double charge);

// Advances the battery one step. Draw is power_draw_w while discharging; the
// charger runs at the constant full-charge rate while charging.
BatteryState battery_step(const BatteryState& b, const BatteryParams& p,
                          double power_draw_w, double dt);

// Ornstein-Uhlenbeck gusts around a constant mean.
struct WindModel {
  Vec3 mean{0, 0, 0};          // m/s
  Vec3 gust_stddev{0, 0, 0};   // m/s
  double correlation_time_s = 2.0;
};

class WindSim {
 public:
  WindSim(const WindModel& model, std::uint64_t seed);
  Vec3 step(double dt);
  Vec3 current() const { return wind_; }

 private:
  WindModel model_;
  Vec3 gust_{0, 0, 0};
  Vec3 wind_{0, 0, 0};
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

// Normalized motor command [0,1] -> (thrust N, speed rad/s). Quadratic in
// speed, linear in command on the speed axis. Out-of-range commands clamp;
// *clamped is set when provided.
struct MotorPoint {
  double thrust_n = 0.0;
  double speed_rad_s = 0.0;
};
MotorPoint motor_calibration_map(const VehicleParams& p, double cmd, bool* clamped = nullptr);
double motor_inverse_map(const VehicleParams& p, double thrust_n);

// Quad-X allocation: wrench = [T, tau_x, tau_y, tau_z], f = per-motor thrusts.
Eigen::Matrix4d allocation_matrix(const VehicleParams& p);
Eigen::Matrix4d allocation_inverse(const VehicleParams& p);

// One RK4 step of the rigid-body dynamics with first-order motor lag, gravity
// and linear drag relative to the wind. motor_cmds are thrust demands in N.
// Contact is not resolved here; callers follow up with pad_contact().
// Throws std::domain_error on non-finite inputs.
TrueVehicleState step_dynamics(const TrueVehicleState& state,
                               const std::array<double, 4>& motor_cmds_n,
                               const Vec3& wind, const VehicleParams& params,
                               double dt,
                               const std::array<double, 4>& motor_thrust_scale = {1, 1, 1, 1});

// Resolves ground / pad contact: descending through the pad surface inside the
// pad clamps to the pad, outside it clamps to the ground plane (z = 0).
// Releases contact once net thrust exceeds weight.
TrueVehicleState pad_contact(const TrueVehicleState& state, const PadPose& pad,
                             const VehicleParams& params);

}  // namespace sortie::sim
