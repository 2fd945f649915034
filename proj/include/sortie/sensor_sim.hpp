// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <random>

#include "sortie/geometry.hpp"
#include "sortie/vehicle_sim.hpp"
#include "sortie/vision_types.hpp"

namespace sortie::sensors {

struct ImuSample {
  Vec3 accel{0, 0, 0};  // specific force, body frame, m/s^2
  Vec3 gyro{0, 0, 0};   // body frame, rad/s
  double time_s = 0.0;
};

struct GpsSample {
  Vec3 position{0, 0, 0};  // world, at the antenna
  Vec2 velocity_2d{0, 0};  // horizontal world velocity
  double time_s = 0.0;
};

struct BaroSample {
  double height_m = 0.0;  // pressure height
  double time_s = 0.0;
};

struct MagSample {
  Vec3 field{1, 0, 0};  // normalized field direction plus noise
  double time_s = 0.0;
};

struct DirectPosSample {
  Vec3 position{0, 0, 0};
  double time_s = 0.0;
};

struct ImuParams {
  double rate_hz = 200.0;
  double accel_noise = 0.02;        // m/s^2 per sample
  double gyro_noise = 0.002;        // rad/s per sample
  double accel_bias_rw = 5.0e-4;    // m/s^2 / sqrt(s)
  double gyro_bias_rw = 5.0e-5;     // rad/s / sqrt(s)
  Vec3 accel_bias0{0.05, -0.03, 0.08};
  Vec3 gyro_bias0{0.002, -0.001, 0.0015};
};

struct GpsParams {
  double rate_hz = 20.0;
  Vec3 pos_sigma{0.8, 0.8, 1.5};
  double vel_sigma = 0.1;
  double latency_s = 0.05;
  Vec3 antenna_lever_arm{0.12, 0.03, 0.25};  // true p_ig
};

struct BaroParams {
  double rate_hz = 20.0;
  double sigma = 0.3;
  double drift_rw = 0.005;      // m / sqrt(s)
  double offset_m = 12.3;       // pressure-height datum offset from world z
  Vec3 sensor_lever_arm{0.02, -0.01, 0.0};  // true p_ip
};

struct MagParams {
  double rate_hz = 60.0;
  double direction_sigma = 0.01745;        // ~1 deg, additive per axis
  Vec3 world_field{0.0, 0.5, -0.8660254};  // unit, ENU with inclination
  Quat q_im{1, 0, 0, 0};                   // true IMU -> magnetometer mount
};

struct DirectPosParams {
  double rate_hz = 20.0;
  double sigma = 0.001;  // motion-capture grade
  double latency_s = 0.0;
};

struct TagVisibilityParams {
  // Calibrated so the default camera drops small (15 cm) tags above 4 m and
  // large (48 cm) tags below 2 m.
  double min_edge_px = 11.83;
  double max_edge_frac = 0.1007;
  double pixel_noise_sigma = 0.4;
};

// Computes visibility thresholds for a camera such that a tag of
// small_tag_size drops out above far_cutoff and one of large_tag_size drops
// out below near_cutoff.
TagVisibilityParams calibrate_visibility(const vision::CameraModel& cam,
                                         double small_tag_size, double far_cutoff_m,
                                         double large_tag_size, double near_cutoff_m,
                                         double pixel_noise_sigma);

struct SensorParams {
  ImuParams imu;
  GpsParams gps;
  BaroParams baro;
  MagParams mag;
  DirectPosParams direct_pos;
  TagVisibilityParams visibility;
  vision::CameraModel camera = vision::make_default_camera();
};

// Owns per-sensor noise streams and slowly-evolving bias states. All outputs
// are deterministic functions of (truth trace, seed).
class SensorSuite {
 public:
  SensorSuite(const SensorParams& params, std::uint64_t seed);

  ImuSample sample_imu(const sim::TrueVehicleState& truth);
  GpsSample sample_gps(const sim::TrueVehicleState& truth);
  BaroSample sample_baro(const sim::TrueVehicleState& truth);
  MagSample sample_mag(const sim::TrueVehicleState& truth);
  DirectPosSample sample_direct_pos(const sim::TrueVehicleState& truth);

  // Projects every bundle tag through the camera at the vehicle's pose.
  // pad_in_world places the landing frame; occlusion empties the set.
  vision::TagDetectionSet sample_tag_detections(const sim::TrueVehicleState& truth,
                                                const vision::TagBundleSpec& bundle,
                                                const Pose& pad_in_world);

  void set_occluded(bool occluded) { occluded_ = occluded; }
  // Forget the delta-v reference after a discontinuous state change (world
  // teleports in test harnesses).
  void reset_motion_reference() { have_prev_vel_ = false; }

  const SensorParams& params() const { return params_; }
  const Vec3& accel_bias() const { return accel_bias_; }
  const Vec3& gyro_bias() const { return gyro_bias_; }
  double baro_drift() const { return baro_drift_; }

 private:
  Vec3 gauss3(std::mt19937_64& rng, double sigma);
  Vec3 gauss3(std::mt19937_64& rng, const Vec3& sigma);

  SensorParams params_;
  Vec3 accel_bias_, gyro_bias_;
  double baro_drift_ = 0.0;
  bool occluded_ = false;
  Vec3 prev_vel_{0, 0, 0};
  double prev_vel_time_ = 0.0;
  bool have_prev_vel_ = false;
  std::mt19937_64 rng_imu_, rng_gps_, rng_baro_, rng_mag_, rng_pix_, rng_dpos_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

// Noiseless projection of one tag; returns corners and the mean projected
// edge length, or nullopt when any corner falls outside the image or behind
// the camera. Pose arguments give the camera in the landing frame.
std::optional<std::pair<std::array<Vec2, 4>, double>> project_tag(
    const vision::CameraModel& cam, const Pose& camera_in_landing,
    const vision::TagSpec& tag);

}  // namespace sortie::sensors
