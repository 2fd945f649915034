// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "sortie/geometry.hpp"
#include "sortie/trajectory_gen.hpp"
#include "sortie/vehicle_sim.hpp"

namespace sortie::ctl {

struct TranslationGains {
  Vec3 kp{2.25, 2.25, 4.0};
  Vec3 ki{0.3, 0.3, 0.5};
  Vec3 kd{2.7, 2.7, 3.6};     // velocity-error gain
  double integrator_limit = 2.0;   // m/s^2 per axis
  double prefilter_tau_s = 0.25;
};

struct AttitudeGains {
  double tau_tilt_s = 0.15;
  double tau_yaw_s = 0.4;
};

struct BodyRateGains {
  Vec3 k_omega{30.0, 30.0, 15.0};  // 1/s
};

struct AttitudeRefs {
  Vec3 omega_ref{0, 0, 0};
  double thrust_ref = 0.0;  // collective, N
  bool degenerate = false;
};

struct MotorCommand {
  std::array<double, 4> f_ref{0, 0, 0, 0};  // N
};

struct SaturationFlags {
  bool saturated = false;       // any limit handling engaged
  bool yaw_scaled = false;      // yaw torque reduced
  bool thrust_shifted = false;  // collective moved off the demand
  bool critical = false;        // roll/pitch could not be preserved
};

// PID with pre-filtered references and clamped integrator. Output is the
// demanded specific thrust vector (gravity compensation included).
class TranslationController {
 public:
  explicit TranslationController(const TranslationGains& gains) : gains_(gains) {}

  Vec3 step(const traj::FlatSample& ref, const Vec3& pos_est, const Vec3& vel_est, double dt);
  void reset(const Vec3& pos, const Vec3& vel);

  const TranslationGains& gains() const { return gains_; }

 private:
  TranslationGains gains_;
  Vec3 integrator_{0, 0, 0};
  Vec3 filt_pos_{0, 0, 0};
  Vec3 filt_vel_{0, 0, 0};
  bool primed_ = false;
};

// Quaternion attitude controller: thrust direction + yaw -> body-rate
// reference and collective thrust. Shortest-rotation handling via the sign of
// the error quaternion's scalar part.
class AttitudeController {
 public:
  AttitudeController(const AttitudeGains& gains, double mass_kg)
      : gains_(gains), mass_kg_(mass_kg) {}

  AttitudeRefs step(const Vec3& a_ref, double psi_ref, const Quat& q_est,
                    const Vec3& omega_ff = Vec3::Zero());

 private:
  AttitudeGains gains_;
  double mass_kg_;
  Mat3 last_r_des_ = Mat3::Identity();
  bool have_last_ = false;
};

// Feedback-linearizing rate loop: J*K*(w_ref - w) + w x Jw.
Vec3 body_rate_control(const Vec3& omega_ref, const Vec3& omega_est, const Vec3& inertia_diag,
                       const BodyRateGains& gains);

// Quad-X allocation with prioritized saturation: yaw is scaled first, then
// collective thrust shifts, and roll/pitch torques are preserved exactly
// unless that alone is infeasible (critical flag).
MotorCommand mix_and_saturate(const Vec3& torques, double thrust_ref,
                              const sim::VehicleParams& params, SaturationFlags* flags = nullptr);

struct ControlDiagnostics {
  Vec3 a_ref{0, 0, 0};
  Vec3 omega_ref{0, 0, 0};
  double thrust_ref = 0.0;
  MotorCommand motors;
  SaturationFlags saturation;
};

// Glue object stepping the outer loop at guidance rate and the inner loops at
// the physics rate.
class CascadedController {
 public:
  CascadedController(const TranslationGains& tg, const AttitudeGains& ag,
                     const BodyRateGains& rg, const sim::VehicleParams& params)
      : translation_(tg), attitude_(ag, params.mass_kg), rate_gains_(rg), params_(params) {}

  void step_guidance(const traj::FlatSample& ref, const Vec3& pos_est, const Vec3& vel_est,
                     double dt);
  ControlDiagnostics step_inner(const Quat& q_est, const Vec3& omega_est);
  void reset(const Vec3& pos_est, const Vec3& vel_est);

 private:
  TranslationController translation_;
  AttitudeController attitude_;
  BodyRateGains rate_gains_;
  sim::VehicleParams params_;
  Vec3 a_ref_{0, 0, kGravityMss};
  double psi_ref_ = 0.0;
  Vec3 omega_ff_{0, 0, 0};
};

}  // namespace sortie::ctl
