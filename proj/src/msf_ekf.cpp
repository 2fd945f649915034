// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/msf_ekf.hpp"

#include <algorithm>
#include <cmath>

namespace sortie::ekf {

int measurement_dim(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::kGpsPos:
    case MeasurementKind::kMag3d:
    case MeasurementKind::kDirectPos:
      return 3;
    case MeasurementKind::kGpsVel2d:
      return 2;
    case MeasurementKind::kPressureHeight:
      return 1;
  }
  return 0;
}

const char* measurement_name(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::kGpsPos: return "gps_pos";
    case MeasurementKind::kGpsVel2d: return "gps_vel_2d";
    case MeasurementKind::kPressureHeight: return "pressure_height";
    case MeasurementKind::kMag3d: return "mag_3d";
    case MeasurementKind::kDirectPos: return "direct_pos";
  }
  return "unknown";
}

double chi2_gate_threshold(int dof) {
  switch (dof) {
    case 1: return 10.8276;
    case 2: return 13.8155;
    case 3: return 16.2662;
    default: return 18.4668;  // dof 4
  }
}

PredictedMeasurement predict_measurement(const FilterState& fs, MeasurementKind kind,
                                         const Vec3& gyro_corrected) {
  PredictedMeasurement out;
  const int dim = measurement_dim(kind);
  out.z_hat.resize(dim);
  out.jacobian.setZero(dim, kErrorDim);
  const Mat3 c_wi = fs.q_wi.toRotationMatrix();

  switch (kind) {
    case MeasurementKind::kGpsPos: {
      out.z_hat = fs.p_wi + c_wi * fs.p_ig;
      out.jacobian.block<3, 3>(0, kIdxP) = Mat3::Identity();
      out.jacobian.block<3, 3>(0, kIdxTheta) = -c_wi * skew(fs.p_ig);
      out.jacobian.block<3, 3>(0, kIdxPig) = c_wi;
      break;
    }
    case MeasurementKind::kGpsVel2d: {
      const Vec3 lever_rate = gyro_corrected.cross(fs.p_ig);
      const Vec3 vel = fs.v_wi + c_wi * lever_rate;
      out.z_hat = vel.head<2>();
      Eigen::Matrix<double, 3, kErrorDim> h3;
      h3.setZero();
      h3.block<3, 3>(0, kIdxV) = Mat3::Identity();
      h3.block<3, 3>(0, kIdxTheta) = -c_wi * skew(lever_rate);
      h3.block<3, 3>(0, kIdxBg) = c_wi * skew(fs.p_ig);
      h3.block<3, 3>(0, kIdxPig) = c_wi * skew(gyro_corrected);
      out.jacobian = h3.topRows<2>();
      break;
    }
    case MeasurementKind::kPressureHeight: {
      out.z_hat(0) = (fs.p_wi + c_wi * fs.p_ip).z() + fs.baro_bias;
      out.jacobian(0, kIdxP + 2) = 1.0;
      out.jacobian.block<1, 3>(0, kIdxTheta) = -(c_wi * skew(fs.p_ip)).row(2);
      out.jacobian(0, kIdxBp) = 1.0;
      out.jacobian.block<1, 3>(0, kIdxPip) = c_wi.row(2);
      break;
    }
    case MeasurementKind::kMag3d: {
      const Mat3 a = fs.q_im.toRotationMatrix().transpose();
      const Vec3 m_body = c_wi.transpose() * fs.m_w;
      out.z_hat = a * m_body;
      out.jacobian.block<3, 3>(0, kIdxTheta) = a * skew(m_body);
      out.jacobian.block<3, 3>(0, kIdxThetaIm) = skew(out.z_hat.head<3>());
      out.jacobian.block<3, 3>(0, kIdxMw) = a * c_wi.transpose();
      break;
    }
    case MeasurementKind::kDirectPos: {
      out.z_hat = fs.p_wi;
      out.jacobian.block<3, 3>(0, kIdxP) = Mat3::Identity();
      break;
    }
  }
  return out;
}

void propagate_state(FilterState& fs, ErrorCov& cov, const sensors::ImuSample& imu, double dt,
                     const ProcessNoise& noise) {
  const Vec3 omega = imu.gyro - fs.gyro_bias;
  const Vec3 accel = imu.accel - fs.accel_bias;

  const Mat3 c0 = fs.q_wi.toRotationMatrix();
  fs.q_wi = normalized(fs.q_wi * quat_exp(omega * dt));
  const Mat3 c1 = fs.q_wi.toRotationMatrix();
  const Mat3 c_mid = 0.5 * (c0 + c1);

  const Vec3 a_world = c_mid * accel + kGravityW;
  fs.p_wi += fs.v_wi * dt + 0.5 * a_world * dt * dt;
  fs.v_wi += a_world * dt;
  fs.time_s = imu.time_s;

  // First-order discrete error-state transition.
  ErrorCov phi = ErrorCov::Identity();
  phi.block<3, 3>(kIdxP, kIdxV) = Mat3::Identity() * dt;
  phi.block<3, 3>(kIdxV, kIdxTheta) = -c_mid * skew(accel) * dt;
  phi.block<3, 3>(kIdxV, kIdxBa) = -c_mid * dt;
  phi.block<3, 3>(kIdxTheta, kIdxTheta) = Mat3::Identity() - skew(omega) * dt;
  phi.block<3, 3>(kIdxTheta, kIdxBg) = -Mat3::Identity() * dt;

  ErrorVec q_diag = ErrorVec::Zero();
  const double qv = noise.accel_noise * noise.accel_noise * dt * dt +
                    noise.vel_drive * noise.vel_drive * dt;
  const double qt = noise.gyro_noise * noise.gyro_noise * dt * dt +
                    noise.att_drive * noise.att_drive * dt;
  for (int i = 0; i < 3; ++i) {
    q_diag[kIdxP + i] = noise.pos_drive * noise.pos_drive * dt;
    q_diag[kIdxV + i] = qv;
    q_diag[kIdxTheta + i] = qt;
    q_diag[kIdxBg + i] = noise.gyro_bias_rw * noise.gyro_bias_rw * dt;
    q_diag[kIdxBa + i] = noise.accel_bias_rw * noise.accel_bias_rw * dt;
    q_diag[kIdxMw + i] = noise.mw_rw * noise.mw_rw * dt;
  }
  q_diag[kIdxBp] = noise.baro_bias_rw * noise.baro_bias_rw * dt;

  cov = phi * cov * phi.transpose();
  cov += q_diag.asDiagonal();
  cov = 0.5 * (cov + cov.transpose()).eval();
}

namespace {

void inject_error(FilterState& fs, const ErrorVec& dx) {
  fs.p_wi += dx.segment<3>(kIdxP);
  fs.v_wi += dx.segment<3>(kIdxV);
  fs.q_wi = apply_small_angle(fs.q_wi, dx.segment<3>(kIdxTheta));
  fs.gyro_bias += dx.segment<3>(kIdxBg);
  fs.accel_bias += dx.segment<3>(kIdxBa);
  fs.p_ig += dx.segment<3>(kIdxPig);
  fs.q_im = apply_small_angle(fs.q_im, dx.segment<3>(kIdxThetaIm));
  fs.m_w = (fs.m_w + dx.segment<3>(kIdxMw)).normalized();
  fs.baro_bias += dx(kIdxBp);
  fs.p_ip += dx.segment<3>(kIdxPip);
}

}  // namespace

UpdateOutcome update_state(FilterState& fs, ErrorCov& cov, const Measurement& meas,
                           const FilterTuning& tuning) {
  UpdateOutcome out;
  out.kind = meas.kind;
  out.time_s = meas.time_s;
  out.dof = measurement_dim(meas.kind);

  const Vec3 gyro_corr = meas.gyro_raw ? Vec3(*meas.gyro_raw - fs.gyro_bias) : Vec3::Zero();
  const PredictedMeasurement pred = predict_measurement(fs, meas.kind, gyro_corr);

  const Eigen::VectorXd innovation = meas.value - pred.z_hat;
  const Eigen::MatrixXd s = pred.jacobian * cov * pred.jacobian.transpose() + meas.noise;
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  out.nis = innovation.dot(llt.solve(innovation));

  if (tuning.gate_scale > 0.0 &&
      out.nis > tuning.gate_scale * chi2_gate_threshold(out.dof)) {
    out.accepted = false;
    return out;
  }

  const Eigen::Matrix<double, kErrorDim, Eigen::Dynamic> pht = cov * pred.jacobian.transpose();
  const Eigen::Matrix<double, kErrorDim, Eigen::Dynamic> gain =
      llt.solve(pht.transpose()).transpose();

  inject_error(fs, gain * innovation);

  const ErrorCov ikh = ErrorCov::Identity() - gain * pred.jacobian;
  cov = ikh * cov * ikh.transpose() + gain * meas.noise * gain.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  out.accepted = true;
  return out;
}

std::pair<FilterState, ErrorCov> init_filter(const std::vector<sensors::ImuSample>& imu_window,
                                             const Vec3& position_fix, bool fix_at_antenna,
                                             double baro_height,
                                             const std::vector<sensors::MagSample>& mag_window,
                                             const InitialCalibration& calib,
                                             const FilterTuning& tuning) {
  if (imu_window.size() < 100 || mag_window.empty()) {
    throw FilterInitError("init_filter: sensor windows too short");
  }

  Vec3 accel_mean = Vec3::Zero();
  for (const auto& s : imu_window) accel_mean += s.accel;
  accel_mean /= static_cast<double>(imu_window.size());

  Vec3 accel_var = Vec3::Zero();
  for (const auto& s : imu_window) {
    accel_var += (s.accel - accel_mean).cwiseAbs2();
  }
  accel_var /= static_cast<double>(imu_window.size());
  if (accel_var.maxCoeff() > tuning.init_accel_var_max) {
    throw FilterInitError("init_filter: excessive motion during the static window");
  }

  Vec3 mag_mean = Vec3::Zero();
  for (const auto& s : mag_window) mag_mean += s.field;
  mag_mean /= static_cast<double>(mag_window.size());

  FilterState fs;
  fs.p_ig = calib.p_ig;
  fs.q_im = normalized(calib.q_im);
  fs.m_w = calib.m_w.normalized();
  fs.p_ip = calib.p_ip;

  // Roll/pitch from the averaged gravity direction, yaw from the
  // tilt-compensated magnetometer heading.
  const Vec3 g_body = accel_mean.normalized();
  const Quat q_tilt = Quat::FromTwoVectors(g_body, Vec3::UnitZ());
  const Vec3 m_body = calib.q_im * mag_mean;  // into the IMU frame
  const Vec3 m_level = q_tilt * m_body;
  const double yaw = std::atan2(fs.m_w.y(), fs.m_w.x()) - std::atan2(m_level.y(), m_level.x());
  fs.q_wi = normalized(quat_from_yaw(yaw) * q_tilt);

  const Mat3 c = fs.q_wi.toRotationMatrix();
  fs.accel_bias = accel_mean - c.transpose() * (-kGravityW);
  fs.gyro_bias.setZero();
  fs.v_wi.setZero();
  fs.p_wi = fix_at_antenna ? Vec3(position_fix - c * fs.p_ig) : position_fix;
  fs.baro_bias = baro_height - (fs.p_wi + c * fs.p_ip).z();
  fs.time_s = imu_window.back().time_s;

  ErrorVec sigmas;
  const InitSigmas& is = tuning.init;
  sigmas << is.p, Vec3::Constant(is.v), Vec3(is.tilt, is.tilt, is.yaw),
      Vec3::Constant(is.gyro_bias), Vec3::Constant(is.accel_bias), Vec3::Constant(is.p_ig),
      Vec3::Constant(is.theta_im), Vec3::Constant(is.m_w), is.baro_bias,
      Vec3::Constant(is.p_ip);
  ErrorCov cov = sigmas.cwiseAbs2().asDiagonal();
  return {fs, cov};
}

void MsfEkf::initialize(const std::vector<sensors::ImuSample>& imu_window,
                        const Vec3& position_fix, bool fix_at_antenna, double baro_height,
                        const std::vector<sensors::MagSample>& mag_window,
                        const InitialCalibration& calib, double time_s) {
  auto [fs, cov] = init_filter(imu_window, position_fix, fix_at_antenna, baro_height,
                               mag_window, calib, tuning_);
  fs.time_s = time_s;
  buffer_.clear();
  buffer_.push_back(BufferEntry{time_s, {}, 0.0, fs, cov});
  initialized_ = true;
}

void MsfEkf::set_state(const FilterState& fs, const ErrorCov& cov) {
  buffer_.clear();
  buffer_.push_back(BufferEntry{fs.time_s, {}, 0.0, fs, cov});
  initialized_ = true;
}

void MsfEkf::propagate(const sensors::ImuSample& imu, double dt) {
  BufferEntry entry = buffer_.back();
  propagate_state(entry.state, entry.cov, imu, dt, tuning_.noise);
  entry.time_s = imu.time_s;
  entry.imu = imu;
  entry.dt = dt;
  buffer_.push_back(entry);

  const double horizon = tuning_.buffer_horizon_s;
  while (buffer_.size() > 2 && buffer_.front().time_s < imu.time_s - horizon) {
    buffer_.pop_front();
  }
}

UpdateOutcome MsfEkf::process_measurement(const Measurement& meas) {
  if (meas.time_s < buffer_.front().time_s - 1e-9) {
    UpdateOutcome out;
    out.kind = meas.kind;
    out.time_s = meas.time_s;
    out.dof = measurement_dim(meas.kind);
    out.dropped = true;
    return out;
  }

  // Newest entry at or before the measurement time.
  std::size_t k = buffer_.size() - 1;
  while (k > 0 && buffer_[k].time_s > meas.time_s + 1e-9) {
    --k;
  }

  UpdateOutcome out = update_state(buffer_[k].state, buffer_[k].cov, meas, tuning_);
  if (!out.accepted) {
    return out;
  }
  // Replay the stored IMU stream so the correction reaches the front state.
  for (std::size_t j = k + 1; j < buffer_.size(); ++j) {
    buffer_[j].state = buffer_[j - 1].state;
    buffer_[j].cov = buffer_[j - 1].cov;
    propagate_state(buffer_[j].state, buffer_[j].cov, buffer_[j].imu, buffer_[j].dt,
                    tuning_.noise);
  }
  return out;
}

}  // namespace sortie::ekf
