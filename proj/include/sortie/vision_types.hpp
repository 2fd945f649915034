// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sortie/geometry.hpp"

namespace sortie::vision {

// Pinhole camera plus its rigid mount on the vehicle body.
struct CameraModel {
  double fx = 0.0, fy = 0.0;  // px
  double cx = 0.0, cy = 0.0;  // px
  int width = 0, height = 0;
  double fov_deg = 0.0;       // horizontal
  Pose mount;                 // camera frame -> body frame
  double rate_hz = 20.0;

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && rate_hz > 0;
  }
};

// Downward-looking camera: optical axis along -z body, image up = +x body.
CameraModel make_default_camera();

// One fiducial marker inside the bundle, posed in the planar landing frame.
struct TagSpec {
  int id = 0;
  double edge_size_m = 0.0;
  Vec2 position{0.0, 0.0};  // landing frame, z = 0
  double yaw_rad = 0.0;
};

struct TagBundleSpec {
  std::vector<TagSpec> tags;

  const TagSpec* find(int id) const {
    for (const auto& t : tags) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
};

// Corner order: (-h,-h), (+h,-h), (+h,+h), (-h,+h) in the tag frame.
std::array<Vec3, 4> tag_corners_landing_frame(const TagSpec& tag);

struct TagDetection {
  int id = 0;
  std::array<Vec2, 4> corners;  // px
};

struct TagDetectionSet {
  double time_s = 0.0;
  std::vector<TagDetection> detections;

  bool empty() const { return detections.empty(); }
};

// Projects a camera-frame point; returns false when behind the camera.
bool project_point(const CameraModel& cam, const Vec3& point_cam, Vec2* px);

}  // namespace sortie::vision
