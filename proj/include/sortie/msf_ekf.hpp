// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sortie/geometry.hpp"
#include "sortie/sensor_sim.hpp"

namespace sortie::ekf {

// Error-state layout. Attitude errors are right-multiplicative small angles.
inline constexpr int kIdxP = 0;
inline constexpr int kIdxV = 3;
inline constexpr int kIdxTheta = 6;
inline constexpr int kIdxBg = 9;
inline constexpr int kIdxBa = 12;
inline constexpr int kIdxPig = 15;
inline constexpr int kIdxThetaIm = 18;
inline constexpr int kIdxMw = 21;
inline constexpr int kIdxBp = 24;
inline constexpr int kIdxPip = 25;
inline constexpr int kErrorDim = 28;

using ErrorCov = Eigen::Matrix<double, kErrorDim, kErrorDim>;
using ErrorVec = Eigen::Matrix<double, kErrorDim, 1>;

struct FilterState {
  Vec3 p_wi{0, 0, 0};
  Vec3 v_wi{0, 0, 0};
  Quat q_wi{1, 0, 0, 0};
  Vec3 gyro_bias{0, 0, 0};
  Vec3 accel_bias{0, 0, 0};
  Vec3 p_ig{0, 0, 0};        // GPS antenna lever arm
  Quat q_im{1, 0, 0, 0};     // IMU -> magnetometer mount
  Vec3 m_w{1, 0, 0};         // world magnetic field direction, unit
  double baro_bias = 0.0;
  Vec3 p_ip{0, 0, 0};        // pressure sensor lever arm
  double time_s = 0.0;
};

enum class MeasurementKind { kGpsPos, kGpsVel2d, kPressureHeight, kMag3d, kDirectPos };

int measurement_dim(MeasurementKind kind);
const char* measurement_name(MeasurementKind kind);

struct Measurement {
  MeasurementKind kind = MeasurementKind::kGpsPos;
  Eigen::VectorXd value;
  Eigen::MatrixXd noise;  // R, positive definite
  double time_s = 0.0;
  // Raw gyro at measurement time; required by the GPS velocity model.
  std::optional<Vec3> gyro_raw;
};

struct ProcessNoise {
  double accel_noise = 0.02;     // m/s^2 per IMU sample
  double gyro_noise = 0.002;     // rad/s per IMU sample
  double accel_bias_rw = 5e-4;   // m/s^2 / sqrt(s)
  double gyro_bias_rw = 5e-5;    // rad/s / sqrt(s)
  double baro_bias_rw = 0.005;   // m / sqrt(s)
  double mw_rw = 1e-5;
  double pos_drive = 0.0;
  double vel_drive = 1e-4;
  double att_drive = 1e-5;
};

struct InitSigmas {
  Vec3 p{1.0, 1.0, 1.5};
  double v = 0.1;
  double tilt = 0.035;   // rad
  double yaw = 0.09;
  double gyro_bias = 0.01;
  double accel_bias = 0.1;
  double p_ig = 0.03;
  double theta_im = 0.035;
  double m_w = 0.02;
  double baro_bias = 0.5;
  double p_ip = 0.02;
};

struct FilterTuning {
  ProcessNoise noise;
  InitSigmas init;
  double gate_scale = 1.0;        // multiplies the chi^2(dof, 0.999) gate; <= 0 disables
  double buffer_horizon_s = 1.0;
  double init_accel_var_max = 0.05;  // per-axis variance threshold, (m/s^2)^2
};

// Manually surveyed deployment calibration used to seed the filter.
struct InitialCalibration {
  Vec3 p_ig{0.12, 0.03, 0.25};
  Quat q_im{1, 0, 0, 0};
  Vec3 m_w{0.0, 0.5, -0.8660254};
  Vec3 p_ip{0.02, -0.01, 0.0};
};

struct PredictedMeasurement {
  Eigen::VectorXd z_hat;
  Eigen::Matrix<double, Eigen::Dynamic, kErrorDim> jacobian;
};

struct UpdateOutcome {
  bool accepted = false;
  bool dropped = false;  // timestamp fell off the buffer
  double nis = 0.0;
  int dof = 0;
  double time_s = 0.0;
  MeasurementKind kind = MeasurementKind::kGpsPos;
};

class FilterInitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// chi^2 inverse CDF at 0.999 for small dof (innovation gating).
double chi2_gate_threshold(int dof);

// Measurement prediction and its analytic error-state Jacobian. gyro_corrected
// is the bias-corrected body rate, used only by the GPS velocity model.
PredictedMeasurement predict_measurement(const FilterState& fs, MeasurementKind kind,
                                         const Vec3& gyro_corrected = Vec3::Zero());

// Strapdown propagation of the nominal state and covariance by one IMU sample.
void propagate_state(FilterState& fs, ErrorCov& cov, const sensors::ImuSample& imu, double dt,
                     const ProcessNoise& noise);

// Error-state EKF update in place. Returns NIS and gate decision; a gated
// measurement leaves state and covariance untouched.
UpdateOutcome update_state(FilterState& fs, ErrorCov& cov, const Measurement& meas,
                           const FilterTuning& tuning);

// Pre-takeoff initialization from a static sensor window. position_fix is a
// world-frame fix; fix_at_antenna marks it as taken at the GPS antenna.
// Throws FilterInitError when the vehicle moved during the window.
std::pair<FilterState, ErrorCov> init_filter(const std::vector<sensors::ImuSample>& imu_window,
                                             const Vec3& position_fix, bool fix_at_antenna,
                                             double baro_height,
                                             const std::vector<sensors::MagSample>& mag_window,
                                             const InitialCalibration& calib,
                                             const FilterTuning& tuning);

// Full filter: 200 Hz propagation, measurement updates at sensor rates, and a
// state/covariance ring buffer so that corrections computed at (possibly
// stale) measurement timestamps are replayed onto the newest state.
class MsfEkf {
 public:
  explicit MsfEkf(const FilterTuning& tuning) : tuning_(tuning) {}

  void initialize(const std::vector<sensors::ImuSample>& imu_window, const Vec3& position_fix,
                  bool fix_at_antenna, double baro_height,
                  const std::vector<sensors::MagSample>& mag_window,
                  const InitialCalibration& calib, double time_s);
  // Direct (hot) start, for harnesses that begin airborne.
  void set_state(const FilterState& fs, const ErrorCov& cov);

  void propagate(const sensors::ImuSample& imu, double dt);
  UpdateOutcome process_measurement(const Measurement& meas);

  bool initialized() const { return initialized_; }
  const FilterState& state() const { return buffer_.back().state; }
  const ErrorCov& covariance() const { return buffer_.back().cov; }
  const FilterTuning& tuning() const { return tuning_; }

 private:
  struct BufferEntry {
    double time_s = 0.0;
    sensors::ImuSample imu;  // sample that advanced the previous entry to this one
    double dt = 0.0;
    FilterState state;
    ErrorCov cov;
  };

  FilterTuning tuning_;
  std::deque<BufferEntry> buffer_;
  bool initialized_ = false;
};

}  // namespace sortie::ekf
