// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sortie/geometry.hpp"
#include "sortie/vision_types.hpp"

namespace sortie::vision {

class VisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CalibrationError : public VisionError {
 public:
  using VisionError::VisionError;
};
class NoDetectionError : public VisionError {
 public:
  using VisionError::VisionError;
};
class EstimationFailedError : public VisionError {
 public:
  using VisionError::VisionError;
};

// Camera pose in the landing (bundle) frame.
struct CameraPoseEstimate {
  Vec3 position{0, 0, 0};
  Quat orientation{1, 0, 0, 0};  // camera frame -> landing frame
  double reprojection_rms_px = 0.0;
  int n_tags_used = 0;
};

// Pad position + yaw in the world frame, tracked by an identity-regressor RLS
// filter with exponential forgetting. Roll and pitch of the pad are fixed at
// zero.
struct RlsPadEstimate {
  Vec4 theta{0, 0, 0, 0};  // x, y, z, yaw
  Mat4 covariance = Mat4::Identity();
  double lambda = 0.95;
  int sample_count = 0;
};

struct BundleCalibrationInput {
  int master_id = 99;
  // Physical edge sizes per tag id; must cover the master and every bundle tag.
  std::vector<std::pair<int, double>> tag_sizes;
  double consistency_threshold_m = 0.02;
  double consistency_threshold_rad = 0.05;
};

// One-time bundle calibration: per-tag planar pose relative to the landing
// point defined by the master tag, averaged over frames. The master tag itself
// is not part of the returned bundle.
TagBundleSpec calibrate_bundle(const std::vector<TagDetectionSet>& frames,
                               const CameraModel& camera, const BundleCalibrationInput& input);

// 6-dof camera pose from detected bundle corners by Levenberg-Marquardt
// reprojection minimization; initialized from the prior pose when given, else
// from a planar homography of the largest detected tag.
CameraPoseEstimate estimate_camera_pose(const TagDetectionSet& detections,
                                        const TagBundleSpec& bundle, const CameraModel& camera,
                                        const std::optional<Pose>& init_camera_in_landing = {});

// Pose of a single square tag in the camera frame (homography + LM refine).
Pose single_tag_pose(const std::array<Vec2, 4>& corners_px, double edge_size_m,
                     const CameraModel& camera);

// Pad pose measurement [x, y, z, yaw] in the world frame from one camera-pose
// estimate and the current vehicle pose.
Vec4 pad_pose_measurement(const CameraPoseEstimate& estimate, const Pose& body_in_world,
                          const Pose& camera_mount);

// RLS with exponential forgetting; yaw innovations are wrapped.
void rls_update(RlsPadEstimate& est, const Vec4& measurement, const Mat4& noise);

// Robust (per-component median) initialization from the hover window.
RlsPadEstimate rls_initialize(const std::vector<Vec4>& window, double lambda);

// Camera height above the landing point.
double bundle_height(const CameraPoseEstimate& estimate);

// Default visual target: one 48 cm tag on the landing point, three 15 cm tags
// on a 0.35 m radius.
TagBundleSpec make_default_bundle();

// Line-oriented bundle file: "id edge_size x y yaw" per tag.
void write_bundle_file(const std::string& path, const TagBundleSpec& bundle);
TagBundleSpec read_bundle_file(const std::string& path);

}  // namespace sortie::vision
