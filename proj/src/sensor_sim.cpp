// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/sensor_sim.hpp"

#include <cmath>

namespace sortie::vision {

CameraModel make_default_camera() {
  CameraModel cam;
  cam.width = 752;
  cam.height = 480;
  cam.fov_deg = 100.0;
  cam.fx = cam.fy = 0.5 * cam.width / std::tan(0.5 * cam.fov_deg * M_PI / 180.0);
  cam.cx = 0.5 * cam.width;
  cam.cy = 0.5 * cam.height;
  cam.rate_hz = 20.0;
  // Nadir mount: cam z = -body z, image right = body right, image up = forward.
  Mat3 r_bc;
  r_bc << 0, -1, 0,
         -1, 0, 0,
          0, 0, -1;
  cam.mount.rotation = Quat(r_bc);
  cam.mount.translation = Vec3(0.0, 0.0, 0.0);
  return cam;
}

std::array<Vec3, 4> tag_corners_landing_frame(const TagSpec& tag) {
  const double h = 0.5 * tag.edge_size_m;
  const double c = std::cos(tag.yaw_rad), s = std::sin(tag.yaw_rad);
  const std::array<Vec2, 4> local{Vec2(-h, -h), Vec2(h, -h), Vec2(h, h), Vec2(-h, h)};
  std::array<Vec3, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Vec3(tag.position.x() + c * local[i].x() - s * local[i].y(),
                  tag.position.y() + s * local[i].x() + c * local[i].y(), 0.0);
  }
  return out;
}

bool project_point(const CameraModel& cam, const Vec3& point_cam, Vec2* px) {
  if (point_cam.z() <= 1e-6) {
    return false;
  }
  px->x() = cam.fx * point_cam.x() / point_cam.z() + cam.cx;
  px->y() = cam.fy * point_cam.y() / point_cam.z() + cam.cy;
  return true;
}

}  // namespace sortie::vision

namespace sortie::sensors {

using vision::CameraModel;
using vision::TagBundleSpec;
using vision::TagDetection;
using vision::TagDetectionSet;
using vision::TagSpec;

TagVisibilityParams calibrate_visibility(const CameraModel& cam,
                                         double small_tag_size, double far_cutoff_m,
                                         double large_tag_size, double near_cutoff_m,
                                         double pixel_noise_sigma) {
  TagVisibilityParams v;
  // Fronto-parallel projection scales edges by fx/height exactly, so the
  // cutoff distances translate directly into pixel thresholds.
  v.min_edge_px = cam.fx * small_tag_size / far_cutoff_m - 1e-9;
  v.max_edge_frac = (cam.fx * large_tag_size / near_cutoff_m) / cam.width + 1e-12;
  v.pixel_noise_sigma = pixel_noise_sigma;
  return v;
}

namespace {
std::uint64_t substream(std::uint64_t seed, std::uint64_t idx) {
  // splitmix64 scramble keeps per-sensor streams independent.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (idx + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

SensorSuite::SensorSuite(const SensorParams& params, std::uint64_t seed)
    : params_(params),
      accel_bias_(params.imu.accel_bias0),
      gyro_bias_(params.imu.gyro_bias0),
      rng_imu_(substream(seed, 1)),
      rng_gps_(substream(seed, 2)),
      rng_baro_(substream(seed, 3)),
      rng_mag_(substream(seed, 4)),
      rng_pix_(substream(seed, 5)),
      rng_dpos_(substream(seed, 6)) {}

Vec3 SensorSuite::gauss3(std::mt19937_64& rng, double sigma) {
  return Vec3(sigma * gauss_(rng), sigma * gauss_(rng), sigma * gauss_(rng));
}

Vec3 SensorSuite::gauss3(std::mt19937_64& rng, const Vec3& sigma) {
  return Vec3(sigma.x() * gauss_(rng), sigma.y() * gauss_(rng), sigma.z() * gauss_(rng));
}

ImuSample SensorSuite::sample_imu(const sim::TrueVehicleState& truth) {
  const double dt = 1.0 / params_.imu.rate_hz;
  accel_bias_ += gauss3(rng_imu_, params_.imu.accel_bias_rw * std::sqrt(dt));
  gyro_bias_ += gauss3(rng_imu_, params_.imu.gyro_bias_rw * std::sqrt(dt));

  // Delta-v accelerometer: mean acceleration over the sample interval, so
  // short impulses (ground contact) show up in the specific force.
  Vec3 accel_avg = truth.accel_world;
  if (have_prev_vel_ && truth.time_s > prev_vel_time_ + 1e-9) {
    accel_avg = (truth.velocity - prev_vel_) / (truth.time_s - prev_vel_time_);
  }
  prev_vel_ = truth.velocity;
  prev_vel_time_ = truth.time_s;
  have_prev_vel_ = true;

  const Mat3 c = truth.attitude.toRotationMatrix();
  ImuSample s;
  s.accel = c.transpose() * (accel_avg - kGravityW) + accel_bias_ +
            gauss3(rng_imu_, params_.imu.accel_noise);
  s.gyro = truth.body_rates + gyro_bias_ + gauss3(rng_imu_, params_.imu.gyro_noise);
  s.time_s = truth.time_s;
  return s;
}

GpsSample SensorSuite::sample_gps(const sim::TrueVehicleState& truth) {
  const Mat3 c = truth.attitude.toRotationMatrix();
  const Vec3 lever = params_.gps.antenna_lever_arm;
  GpsSample s;
  s.position = truth.position + c * lever + gauss3(rng_gps_, params_.gps.pos_sigma);
  const Vec3 vel = truth.velocity + c * truth.body_rates.cross(lever);
  s.velocity_2d = vel.head<2>() +
                  Vec2(params_.gps.vel_sigma * gauss_(rng_gps_),
                       params_.gps.vel_sigma * gauss_(rng_gps_));
  s.time_s = truth.time_s;
  return s;
}

BaroSample SensorSuite::sample_baro(const sim::TrueVehicleState& truth) {
  const double dt = 1.0 / params_.baro.rate_hz;
  baro_drift_ += params_.baro.drift_rw * std::sqrt(dt) * gauss_(rng_baro_);
  const Mat3 c = truth.attitude.toRotationMatrix();
  BaroSample s;
  s.height_m = (truth.position + c * params_.baro.sensor_lever_arm).z() +
               params_.baro.offset_m + baro_drift_ +
               params_.baro.sigma * gauss_(rng_baro_);
  s.time_s = truth.time_s;
  return s;
}

MagSample SensorSuite::sample_mag(const sim::TrueVehicleState& truth) {
  const Mat3 c_wi = truth.attitude.toRotationMatrix();
  const Mat3 c_im = params_.mag.q_im.toRotationMatrix();
  MagSample s;
  s.field = c_im.transpose() * (c_wi.transpose() * params_.mag.world_field) +
            gauss3(rng_mag_, params_.mag.direction_sigma);
  s.time_s = truth.time_s;
  return s;
}

DirectPosSample SensorSuite::sample_direct_pos(const sim::TrueVehicleState& truth) {
  DirectPosSample s;
  s.position = truth.position + gauss3(rng_dpos_, params_.direct_pos.sigma);
  s.time_s = truth.time_s;
  return s;
}

std::optional<std::pair<std::array<Vec2, 4>, double>> project_tag(
    const CameraModel& cam, const Pose& camera_in_landing, const TagSpec& tag) {
  const Pose landing_in_camera = camera_in_landing.inverse();
  const auto corners3 = vision::tag_corners_landing_frame(tag);
  std::array<Vec2, 4> px;
  for (int i = 0; i < 4; ++i) {
    const Vec3 pc = landing_in_camera.apply(corners3[i]);
    if (!vision::project_point(cam, pc, &px[i])) {
      return std::nullopt;
    }
    if (px[i].x() < 0 || px[i].x() > cam.width || px[i].y() < 0 || px[i].y() > cam.height) {
      return std::nullopt;
    }
  }
  double edge_sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    edge_sum += (px[(i + 1) % 4] - px[i]).norm();
  }
  return std::make_pair(px, 0.25 * edge_sum);
}

TagDetectionSet SensorSuite::sample_tag_detections(const sim::TrueVehicleState& truth,
                                                   const TagBundleSpec& bundle,
                                                   const Pose& pad_in_world) {
  TagDetectionSet set;
  set.time_s = truth.time_s;
  if (occluded_) {
    return set;
  }

  const Pose body_in_world{truth.attitude, truth.position};
  const Pose camera_in_world = body_in_world * params_.camera.mount;
  const Pose camera_in_landing = pad_in_world.inverse() * camera_in_world;
  if (camera_in_landing.translation.z() <= 0.0) {
    return set;  // at or below the pad plane
  }

  for (const TagSpec& tag : bundle.tags) {
    const auto proj = project_tag(params_.camera, camera_in_landing, tag);
    if (!proj) {
      continue;
    }
    const double edge = proj->second;
    if (edge < params_.visibility.min_edge_px ||
        edge > params_.visibility.max_edge_frac * params_.camera.width) {
      continue;
    }
    TagDetection det;
    det.id = tag.id;
    det.corners = proj->first;
    const double s = params_.visibility.pixel_noise_sigma;
    for (auto& c : det.corners) {
      c.x() += s * gauss_(rng_pix_);
      c.y() += s * gauss_(rng_pix_);
    }
    set.detections.push_back(det);
  }
  return set;
}

}  // namespace sortie::sensors
