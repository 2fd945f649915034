// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/flight_control.hpp"

#include <algorithm>
#include <cmath>

namespace sortie::ctl {

Vec3 TranslationController::step(const traj::FlatSample& ref, const Vec3& pos_est,
                                 const Vec3& vel_est, double dt) {
  if (!primed_) {
    reset(ref.p_ref, ref.v_ref);
  }
  const double alpha = 1.0 - std::exp(-dt / gains_.prefilter_tau_s);
  filt_pos_ += alpha * (ref.p_ref - filt_pos_);
  filt_vel_ += alpha * (ref.v_ref - filt_vel_);

  const Vec3 err_p = filt_pos_ - pos_est;
  const Vec3 err_v = filt_vel_ - vel_est;

  integrator_ += gains_.ki.cwiseProduct(err_p) * dt;
  for (int i = 0; i < 3; ++i) {
    integrator_[i] = std::clamp(integrator_[i], -gains_.integrator_limit, gains_.integrator_limit);
  }

  return ref.a_ff + gains_.kp.cwiseProduct(err_p) + integrator_ +
         gains_.kd.cwiseProduct(err_v) - kGravityW;
}

void TranslationController::reset(const Vec3& pos, const Vec3& vel) {
  integrator_.setZero();
  filt_pos_ = pos;
  filt_vel_ = vel;
  primed_ = true;
}

AttitudeRefs AttitudeController::step(const Vec3& a_ref, double psi_ref, const Quat& q_est,
                                      const Vec3& omega_ff) {
  AttitudeRefs out;
  Mat3 r_des;
  if (a_ref.norm() < 1e-3) {
    out.degenerate = true;
    r_des = have_last_ ? last_r_des_ : traj::attitude_from_flat(Vec3(0, 0, 1), psi_ref);
  } else {
    r_des = traj::attitude_from_flat(a_ref, psi_ref);
    last_r_des_ = r_des;
    have_last_ = true;
  }

  Quat q_des(r_des);
  Quat q_e = q_est.conjugate() * q_des;
  q_e.normalize();
  const double sign = (q_e.w() >= 0.0) ? 1.0 : -1.0;
  out.omega_ref =
      Vec3(2.0 / gains_.tau_tilt_s * sign * q_e.x(), 2.0 / gains_.tau_tilt_s * sign * q_e.y(),
           2.0 / gains_.tau_yaw_s * sign * q_e.z()) +
      omega_ff;

  // Project the demand onto the current body z axis so tilt transients do not
  // bleed altitude.
  const Vec3 body_z = q_est.toRotationMatrix().col(2);
  out.thrust_ref = std::max(0.0, mass_kg_ * a_ref.dot(body_z));
  return out;
}

Vec3 body_rate_control(const Vec3& omega_ref, const Vec3& omega_est, const Vec3& inertia_diag,
                       const BodyRateGains& gains) {
  const Vec3 err = omega_ref - omega_est;
  const Vec3 jw = inertia_diag.cwiseProduct(omega_est);
  return inertia_diag.cwiseProduct(gains.k_omega.cwiseProduct(err)) + omega_est.cross(jw);
}

namespace {

bool feasible(const Eigen::Vector4d& f, double f_max) {
  return f.minCoeff() >= -1e-9 && f.maxCoeff() <= f_max + 1e-9;
}

// Largest s in [0,1] keeping base + s*dir inside [0, f_max] per motor.
double max_feasible_scale(const Eigen::Vector4d& base, const Eigen::Vector4d& dir, double f_max) {
  double s = 1.0;
  for (int i = 0; i < 4; ++i) {
    if (dir[i] > 1e-12) {
      s = std::min(s, (f_max - base[i]) / dir[i]);
    } else if (dir[i] < -1e-12) {
      s = std::min(s, base[i] / -dir[i]);
    }
  }
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

MotorCommand mix_and_saturate(const Vec3& torques, double thrust_ref,
                              const sim::VehicleParams& params, SaturationFlags* flags) {
  SaturationFlags local;
  const double f_max = params.max_motor_thrust_n;
  const Eigen::Matrix4d inv = sim::allocation_inverse(params);

  Eigen::Vector4d wrench(thrust_ref, torques.x(), torques.y(), torques.z());
  Eigen::Vector4d f = inv * wrench;

  if (!feasible(f, f_max)) {
    local.saturated = true;
    // Step 1: keep collective and roll/pitch, pull yaw toward zero.
    const Eigen::Vector4d f_noyaw = inv * Eigen::Vector4d(thrust_ref, torques.x(), torques.y(), 0);
    const Eigen::Vector4d dz = f - f_noyaw;
    if (feasible(f_noyaw, f_max)) {
      const double s = max_feasible_scale(f_noyaw, dz, f_max);
      local.yaw_scaled = s < 1.0 - 1e-12;
      f = f_noyaw + s * dz;
    } else {
      // Step 2: shift collective to fit roll/pitch exactly.
      const Eigen::Vector4d d_rp = inv * Eigen::Vector4d(0, torques.x(), torques.y(), 0);
      double lo = d_rp.minCoeff(), hi = d_rp.maxCoeff();
      Eigen::Vector4d d = d_rp;
      if (hi - lo > f_max) {
        // Roll/pitch alone infeasible: scale them jointly as a last resort.
        local.critical = true;
        d *= f_max / (hi - lo);
        lo = d.minCoeff();
        hi = d.maxCoeff();
      }
      const double t_min = -4.0 * lo;
      const double t_max = 4.0 * (f_max - hi);
      const double t_shift = std::clamp(thrust_ref, t_min, t_max);
      local.thrust_shifted = std::abs(t_shift - thrust_ref) > 1e-12;
      f = d + Eigen::Vector4d::Constant(0.25 * t_shift);
      // Re-introduce whatever yaw torque still fits.
      const Eigen::Vector4d dz2 = inv * Eigen::Vector4d(0, 0, 0, torques.z());
      const double s = max_feasible_scale(f, dz2, f_max);
      local.yaw_scaled = s < 1.0 - 1e-12;
      f += s * dz2;
    }
  }

  MotorCommand cmd;
  for (int i = 0; i < 4; ++i) {
    cmd.f_ref[i] = std::clamp(f[i], 0.0, f_max);
  }
  if (flags != nullptr) {
    *flags = local;
  }
  return cmd;
}

void CascadedController::step_guidance(const traj::FlatSample& ref, const Vec3& pos_est,
                                       const Vec3& vel_est, double dt) {
  a_ref_ = translation_.step(ref, pos_est, vel_est, dt);
  psi_ref_ = ref.psi_ref;
  omega_ff_ = ref.omega_ff;
}

ControlDiagnostics CascadedController::step_inner(const Quat& q_est, const Vec3& omega_est) {
  ControlDiagnostics diag;
  diag.a_ref = a_ref_;
  const AttitudeRefs att = attitude_.step(a_ref_, psi_ref_, q_est, omega_ff_);
  diag.omega_ref = att.omega_ref;
  diag.thrust_ref = att.thrust_ref;
  const Vec3 torque = body_rate_control(att.omega_ref, omega_est, params_.inertia_diag, rate_gains_);
  diag.motors = mix_and_saturate(torque, att.thrust_ref, params_, &diag.saturation);
  return diag;
}

void CascadedController::reset(const Vec3& pos_est, const Vec3& vel_est) {
  translation_.reset(pos_est, vel_est);
}

}  // namespace sortie::ctl
