// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/landing_vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace sortie::vision {

namespace {

struct Correspondence {
  Vec3 point_landing;
  Vec2 pixel;
};

std::vector<Correspondence> collect_correspondences(const TagDetectionSet& detections,
                                                    const TagBundleSpec& bundle,
                                                    int* tags_used) {
  std::vector<Correspondence> out;
  *tags_used = 0;
  for (const auto& det : detections.detections) {
    const TagSpec* tag = bundle.find(det.id);
    if (tag == nullptr) {
      continue;
    }
    const auto corners = tag_corners_landing_frame(*tag);
    for (int i = 0; i < 4; ++i) {
      out.push_back({corners[i], det.corners[i]});
    }
    ++(*tags_used);
  }
  return out;
}

// Homography from landing-plane coordinates to pixels using the 4 corners of
// one tag (exact 8x8 DLT), decomposed into a camera-from-landing pose.
Pose homography_init(const TagDetection& det, const TagSpec& tag, const CameraModel& cam) {
  const auto corners = tag_corners_landing_frame(tag);
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = corners[i].x(), y = corners[i].y();
    const double u = det.corners[i].x(), v = det.corners[i].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.colPivHouseholderQr().solve(b);
  Mat3 hm;
  hm << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;

  Mat3 k;
  k << cam.fx, 0, cam.cx, 0, cam.fy, cam.cy, 0, 0, 1;
  Mat3 m = k.inverse() * hm;
  double lambda = 2.0 / (m.col(0).norm() + m.col(1).norm());
  if (m(2, 2) * lambda < 0.0) {
    lambda = -lambda;  // keep the plane in front of the camera
  }
  Vec3 r1 = lambda * m.col(0);
  Vec3 r2 = lambda * m.col(1);
  const Vec3 t = lambda * m.col(2);
  Mat3 r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);
  const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r_ortho = svd.matrixU() * svd.matrixV().transpose();
  if (r_ortho.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r_ortho = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return Pose{normalized(Quat(r_ortho)), t};  // landing -> camera
}

double reprojection_cost(const Pose& camera_from_landing, const CameraModel& cam,
                         const std::vector<Correspondence>& corr) {
  double cost = 0.0;
  for (const auto& c : corr) {
    const Vec3 pc = camera_from_landing.apply(c.point_landing);
    Vec2 px;
    if (!project_point(cam, pc, &px)) {
      return std::numeric_limits<double>::infinity();
    }
    cost += (px - c.pixel).squaredNorm();
  }
  return cost;
}

}  // namespace

CameraPoseEstimate estimate_camera_pose(const TagDetectionSet& detections,
                                        const TagBundleSpec& bundle, const CameraModel& camera,
                                        const std::optional<Pose>& init_camera_in_landing) {
  int tags_used = 0;
  const auto corr = collect_correspondences(detections, bundle, &tags_used);
  if (corr.empty()) {
    throw NoDetectionError("estimate_camera_pose: no known tags detected");
  }

  Pose pose;  // landing -> camera
  if (init_camera_in_landing) {
    pose = init_camera_in_landing->inverse();
  } else {
    // Largest detected known tag by observed edge length.
    const TagDetection* best = nullptr;
    const TagSpec* best_spec = nullptr;
    double best_edge = -1.0;
    for (const auto& det : detections.detections) {
      const TagSpec* tag = bundle.find(det.id);
      if (tag == nullptr) continue;
      double edge = 0.0;
      for (int i = 0; i < 4; ++i) {
        edge += (det.corners[(i + 1) % 4] - det.corners[i]).norm();
      }
      if (edge > best_edge) {
        best_edge = edge;
        best = &det;
        best_spec = tag;
      }
    }
    pose = homography_init(*best, *best_spec, camera);
  }

  double cost = reprojection_cost(pose, camera, corr);
  if (!std::isfinite(cost)) {
    throw EstimationFailedError("estimate_camera_pose: initialization behind the camera");
  }

  double lm_lambda = 1e-3;
  constexpr double kLambdaMax = 1e10;
  constexpr int kMaxIters = 50;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    const Mat3 r = pose.rotation.toRotationMatrix();
    for (const auto& c : corr) {
      const Vec3 pc = r * c.point_landing + pose.translation;
      Vec2 px;
      if (!project_point(camera, pc, &px)) continue;
      const Vec2 res = px - c.pixel;
      Eigen::Matrix<double, 2, 3> d_px;
      const double iz = 1.0 / pc.z();
      d_px << camera.fx * iz, 0, -camera.fx * pc.x() * iz * iz,
              0, camera.fy * iz, -camera.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> d_pc;
      d_pc.block<3, 3>(0, 0) = Mat3::Identity();
      d_pc.block<3, 3>(0, 3) = -r * skew(c.point_landing);
      const Eigen::Matrix<double, 2, 6> j = d_px * d_pc;
      jtj += j.transpose() * j;
      jtr += j.transpose() * res;
    }

    bool stepped = false;
    while (lm_lambda <= kLambdaMax) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lm_lambda * jtj.diagonal().cwiseMax(1e-9);
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-jtr);
      Pose candidate;
      candidate.translation = pose.translation + delta.head<3>();
      candidate.rotation = normalized(pose.rotation * quat_exp(delta.tail<3>()));
      const double new_cost = reprojection_cost(candidate, camera, corr);
      if (new_cost < cost) {
        pose = candidate;
        cost = new_cost;
        lm_lambda = std::max(lm_lambda * 0.1, 1e-12);
        stepped = true;
        if (delta.norm() < 1e-8) {
          iter = kMaxIters;  // converged
        }
        break;
      }
      lm_lambda *= 10.0;
    }
    if (!stepped) {
      if (lm_lambda > kLambdaMax && cost > 1e6) {
        throw EstimationFailedError("estimate_camera_pose: LM diverged");
      }
      break;  // no further improvement possible
    }
  }

  const Pose camera_in_landing = pose.inverse();
  CameraPoseEstimate out;
  out.position = camera_in_landing.translation;
  out.orientation = camera_in_landing.rotation;
  out.n_tags_used = tags_used;
  out.reprojection_rms_px = std::sqrt(cost / static_cast<double>(corr.size()));
  return out;
}

Pose single_tag_pose(const std::array<Vec2, 4>& corners_px, double edge_size_m,
                     const CameraModel& camera) {
  TagBundleSpec solo;
  solo.tags.push_back(TagSpec{0, edge_size_m, Vec2(0, 0), 0.0});
  TagDetectionSet set;
  TagDetection det;
  det.id = 0;
  det.corners = corners_px;
  set.detections.push_back(det);
  const CameraPoseEstimate est = estimate_camera_pose(set, solo, camera);
  return Pose{est.orientation, est.position}.inverse();  // tag -> camera
}

TagBundleSpec calibrate_bundle(const std::vector<TagDetectionSet>& frames,
                               const CameraModel& camera, const BundleCalibrationInput& input) {
  if (frames.size() < 3) {
    throw CalibrationError("calibrate_bundle: need at least 3 frames");
  }
  std::map<int, double> sizes(input.tag_sizes.begin(), input.tag_sizes.end());
  if (sizes.find(input.master_id) == sizes.end()) {
    throw CalibrationError("calibrate_bundle: master tag size unknown");
  }

  struct Accum {
    std::vector<Vec2> xy;
    std::vector<double> yaw;
  };
  std::map<int, Accum> per_tag;

  for (const auto& frame : frames) {
    const TagDetection* master = nullptr;
    for (const auto& det : frame.detections) {
      if (det.id == input.master_id) {
        master = &det;
      }
    }
    if (master == nullptr) {
      throw CalibrationError("calibrate_bundle: master tag missing from a frame");
    }
    const Pose master_in_cam = single_tag_pose(master->corners, sizes.at(input.master_id), camera);

    int bundle_tags_in_frame = 0;
    for (const auto& det : frame.detections) {
      if (det.id == input.master_id) continue;
      auto it = sizes.find(det.id);
      if (it == sizes.end()) continue;
      const Pose tag_in_cam = single_tag_pose(det.corners, it->second, camera);
      const Pose tag_in_master = master_in_cam.inverse() * tag_in_cam;
      per_tag[det.id].xy.push_back(tag_in_master.translation.head<2>());
      per_tag[det.id].yaw.push_back(yaw_of(tag_in_master.rotation));
      ++bundle_tags_in_frame;
    }
    if (bundle_tags_in_frame == 0) {
      throw CalibrationError("calibrate_bundle: a frame contains no bundle tag");
    }
  }

  TagBundleSpec bundle;
  for (const auto& [id, acc] : per_tag) {
    Vec2 mean_xy = Vec2::Zero();
    for (const auto& p : acc.xy) mean_xy += p;
    mean_xy /= static_cast<double>(acc.xy.size());
    double sy = 0.0, cy = 0.0;
    for (double y : acc.yaw) {
      sy += std::sin(y);
      cy += std::cos(y);
    }
    const double mean_yaw = std::atan2(sy, cy);

    for (std::size_t i = 0; i < acc.xy.size(); ++i) {
      if ((acc.xy[i] - mean_xy).norm() > input.consistency_threshold_m ||
          std::abs(wrap_angle(acc.yaw[i] - mean_yaw)) > input.consistency_threshold_rad) {
        throw CalibrationError("calibrate_bundle: per-frame estimates inconsistent");
      }
    }
    bundle.tags.push_back(TagSpec{id, sizes.at(id), mean_xy, mean_yaw});
  }
  return bundle;
}

Vec4 pad_pose_measurement(const CameraPoseEstimate& estimate, const Pose& body_in_world,
                          const Pose& camera_mount) {
  const Pose camera_in_landing{estimate.orientation, estimate.position};
  const Pose landing_in_world = body_in_world * camera_mount * camera_in_landing.inverse();
  return Vec4(landing_in_world.translation.x(), landing_in_world.translation.y(),
              landing_in_world.translation.z(), yaw_of(landing_in_world.rotation));
}

void rls_update(RlsPadEstimate& est, const Vec4& measurement, const Mat4& noise) {
  est.covariance /= est.lambda;
  const Mat4 gain = est.covariance * (est.covariance + noise).inverse();
  Vec4 innovation = measurement - est.theta;
  innovation(3) = wrap_angle(innovation(3));
  est.theta += gain * innovation;
  est.theta(3) = wrap_angle(est.theta(3));
  est.covariance = (Mat4::Identity() - gain) * est.covariance;
  est.covariance = 0.5 * (est.covariance + est.covariance.transpose()).eval();
  est.sample_count += 1;
}

RlsPadEstimate rls_initialize(const std::vector<Vec4>& window, double lambda) {
  if (window.empty()) {
    throw VisionError("rls_initialize: empty window");
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  RlsPadEstimate est;
  est.lambda = lambda;
  est.sample_count = static_cast<int>(window.size());
  const double yaw_ref = window.front()(3);
  for (int k = 0; k < 4; ++k) {
    std::vector<double> comp;
    comp.reserve(window.size());
    for (const auto& z : window) {
      comp.push_back(k == 3 ? wrap_angle(z(3) - yaw_ref) : z(k));
    }
    const double med = median(comp);
    est.theta(k) = (k == 3) ? wrap_angle(med + yaw_ref) : med;

    double var = 0.0;
    for (double c : comp) {
      const double d = c - med;
      var += d * d;
    }
    var /= static_cast<double>(comp.size());
    est.covariance(k, k) = std::max(var, 1e-6);
  }
  return est;
}

double bundle_height(const CameraPoseEstimate& estimate) { return estimate.position.z(); }

TagBundleSpec make_default_bundle() {
  TagBundleSpec b;
  b.tags.push_back(TagSpec{0, 0.48, Vec2(0.0, 0.0), 0.0});
  for (int i = 0; i < 3; ++i) {
    const double ang = (90.0 + 120.0 * i) * M_PI / 180.0;
    b.tags.push_back(TagSpec{i + 1, 0.15, 0.35 * Vec2(std::cos(ang), std::sin(ang)), 0.0});
  }
  return b;
}

void write_bundle_file(const std::string& path, const TagBundleSpec& bundle) {
  std::ofstream out(path);
  if (!out) {
    throw VisionError("write_bundle_file: cannot open " + path);
  }
  out << "# sortie tag bundle v1: id edge_size_m x_m y_m yaw_rad\n";
  char line[160];
  for (const auto& t : bundle.tags) {
    std::snprintf(line, sizeof(line), "%d %.9g %.9g %.9g %.9g\n", t.id, t.edge_size_m,
                  t.position.x(), t.position.y(), t.yaw_rad);
    out << line;
  }
}

TagBundleSpec read_bundle_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw VisionError("read_bundle_file: cannot open " + path);
  }
  TagBundleSpec bundle;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TagSpec t;
    double x = 0, y = 0;
    if (!(ss >> t.id >> t.edge_size_m >> x >> y >> t.yaw_rad)) {
      throw VisionError("read_bundle_file: malformed line: " + line);
    }
    t.position = Vec2(x, y);
    if (t.edge_size_m <= 0.0 || bundle.find(t.id) != nullptr) {
      throw VisionError("read_bundle_file: invalid tag entry: " + line);
    }
    bundle.tags.push_back(t);
  }
  return bundle;
}

}  // namespace sortie::vision
