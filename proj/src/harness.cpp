// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sortie/landing_vision.hpp"
#include "sortie/sensor_sim.hpp"

namespace sortie::scenario {

namespace {

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
  }
}

void write_summary(const std::string& path, const RunSummary& s) {
  std::ofstream out(path);
  out << "fault " << (s.fault ? 1 : 0) << "\n";
  out << "fault_cause " << s.fault_cause << "\n";
  out << "duration_s " << s.duration_s << "\n";
  out << "sorties " << s.sorties << "\n";
  out << "min_battery_voltage " << s.min_battery_voltage << "\n";
  out << "rms_position_error " << s.rms_position_error << "\n";
  out << "touchdowns " << s.touchdowns.size() << "\n";
}

}  // namespace

RunSummary run_scenario(const ScenarioConfig& cfg, const EventScript& script,
                        const std::string& out_dir) {
  validate_config(cfg);
  World world(cfg);
  RunSummary summary = world.run(cfg.duration_s, script);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    world.log().write_csv(out_dir + "/runlog.csv");
    write_nis_csv(out_dir + "/nis.csv", world.nis_log());
    write_fsm_csv(out_dir + "/fsm.csv", world.engine().transition_log());
    write_summary(out_dir + "/summary.txt", summary);
  }
  return summary;
}

void touchdown_ellipse(const std::vector<Vec2>& points, Vec2* mean, double* major_2sigma,
                       double* minor_2sigma) {
  *mean = Vec2::Zero();
  *major_2sigma = 0.0;
  *minor_2sigma = 0.0;
  const std::size_t n = points.size();
  if (n == 0) return;
  for (const auto& p : points) *mean += p;
  *mean /= static_cast<double>(n);
  if (n < 2) return;

  Mat2 cov = Mat2::Zero();
  for (const auto& p : points) {
    const Vec2 d = p - *mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Mat2> eig(cov);
  *minor_2sigma = 2.0 * std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
  *major_2sigma = 2.0 * std::sqrt(std::max(0.0, eig.eigenvalues()(1)));
}

LandingStats run_monte_carlo_landing(const ScenarioConfig& cfg, int runs,
                                     const std::string& out_dir) {
  if (runs < 2) {
    throw ConfigError("mc-landing: need at least 2 runs");
  }
  validate_config(cfg);

  LandingStats stats;
  stats.runs = runs;
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
  std::uniform_real_distribution<double> offset(-0.5, 0.5);
  std::uniform_real_distribution<double> heading(-M_PI, M_PI);

  std::ofstream csv;
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    csv.open(out_dir + "/mc_landing.csv");
    csv << "run,seed,x,y,within_pad,outcome\n";
  }

  int within = 0;
  for (int i = 0; i < runs; ++i) {
    ScenarioConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + 1000 + static_cast<std::uint64_t>(i);
    const double ox = offset(rng), oy = offset(rng);
    const double yaw0 = heading(rng);

    World world(run_cfg);
    autonomy::HomeRecord home;
    home.horizontal = cfg.pad.center + Vec2(ox, oy);
    home.takeoff_altitude = cfg.pad.surface_height_m;
    home.timestamp = 0.0;
    const Vec3 start(home.horizontal.x(), home.horizontal.y(),
                     cfg.pad.surface_height_m + cfg.return_home.safe_altitude_m);
    world.start_airborne_approach(start, yaw0, home);

    std::string outcome = "timeout";
    for (int chunk = 0; chunk < 150; ++chunk) {
      const RunSummary s = world.run(1.0);
      if (s.fault) {
        outcome = "fault";
        break;
      }
      const auto st = world.engine().state();
      if (st == autonomy::MasterState::kCharging) {
        outcome = "landed";
        break;
      }
      if (st == autonomy::MasterState::kLanded) {
        outcome = "emergency";
        break;
      }
    }

    Vec2 rel = world.truth().position.head<2>() - cfg.pad.center;
    if (outcome == "landed") {
      stats.touchdowns.push_back(rel);
      if (cfg.pad.contains(world.truth().position.head<2>())) {
        ++within;
      }
    } else {
      ++stats.faults;
    }
    if (csv.is_open()) {
      csv << i << "," << run_cfg.seed << "," << rel.x() << "," << rel.y() << ","
          << (cfg.pad.contains(world.truth().position.head<2>()) ? 1 : 0) << "," << outcome
          << "\n";
    }
  }

  touchdown_ellipse(stats.touchdowns, &stats.mean_offset, &stats.half_axis_major,
                    &stats.half_axis_minor);
  stats.fraction_within_pad =
      stats.touchdowns.empty() ? 0.0
                               : static_cast<double>(within) / static_cast<double>(stats.touchdowns.size());

  if (!out_dir.empty()) {
    std::ofstream rep(out_dir + "/mc_summary.txt");
    rep << "runs " << stats.runs << "\n";
    rep << "faults " << stats.faults << "\n";
    rep << "mean_x " << stats.mean_offset.x() << "\n";
    rep << "mean_y " << stats.mean_offset.y() << "\n";
    rep << "half_axis_major_2sigma " << stats.half_axis_major << "\n";
    rep << "half_axis_minor_2sigma " << stats.half_axis_minor << "\n";
    rep << "fraction_within_pad " << stats.fraction_within_pad << "\n";
  }
  return stats;
}

namespace {

// Stationary nadir camera over a single centered tag.
std::vector<double> tag_height_errors(const ScenarioConfig& cfg, double size, double height,
                                      int trials, std::uint64_t seed) {
  vision::TagBundleSpec solo;
  solo.tags.push_back(vision::TagSpec{0, size, Vec2(0, 0), 0.0});

  sensors::SensorSuite suite(cfg.sensors, seed);
  sim::TrueVehicleState truth;
  truth.position = Vec3(0, 0, height);
  truth.attitude = Quat::Identity();
  truth.on_ground = false;

  const Pose pad_identity;
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    const vision::TagDetectionSet dets = suite.sample_tag_detections(truth, solo, pad_identity);
    if (dets.empty()) {
      break;  // visibility model suppresses this cell entirely
    }
    try {
      const auto est = vision::estimate_camera_pose(dets, solo, cfg.sensors.camera);
      const Pose cam_in_world = Pose{truth.attitude, truth.position} * cfg.sensors.camera.mount;
      errors.push_back(vision::bundle_height(est) - cam_in_world.translation.z());
    } catch (const vision::VisionError&) {
      // failed frame counts as undetected
    }
  }
  return errors;
}

double two_sigma(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
  return 2.0 * std::sqrt(var);
}

}  // namespace

std::vector<TagErrorCell> characterize_tag_error(const ScenarioConfig& cfg,
                                                 const std::vector<double>& heights,
                                                 const std::vector<double>& sizes, int trials,
                                                 const std::string& out_dir) {
  std::vector<TagErrorCell> table;
  std::uint64_t cell_idx = 0;
  for (double size : sizes) {
    for (double height : heights) {
      TagErrorCell cell;
      cell.tag_size_m = size;
      cell.height_m = height;
      cell.trials = trials;
      const auto errors =
          tag_height_errors(cfg, size, height, trials, cfg.seed + 77 * (++cell_idx));
      cell.detected = static_cast<int>(errors.size());
      cell.sigma2_height_m = two_sigma(errors);
      table.push_back(cell);
    }
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ofstream csv(out_dir + "/tag_error.csv");
    csv << "tag_size_m,height_m,trials,detected,sigma2_height_m\n";
    for (const auto& c : table) {
      csv << c.tag_size_m << "," << c.height_m << "," << c.trials << "," << c.detected << ","
          << c.sigma2_height_m << "\n";
    }
  }
  return table;
}

double calibrate_pixel_noise(const ScenarioConfig& cfg, double target_sigma2_m, int trials) {
  const auto errors = tag_height_errors(cfg, 0.48, 4.0, trials, cfg.seed + 424242);
  const double measured = two_sigma(errors);
  if (measured <= 0.0) {
    throw ConfigError("calibrate_pixel_noise: reference cell produced no detections");
  }
  // Height error scales linearly with pixel noise in the operating regime.
  return cfg.sensors.visibility.pixel_noise_sigma * target_sigma2_m / measured;
}

std::vector<BundleDescentSample> bundle_descent_profile(const ScenarioConfig& cfg,
                                                        double z_start, double z_end,
                                                        double speed_ms,
                                                        const std::string& out_dir) {
  sensors::SensorSuite suite(cfg.sensors, cfg.seed + 31337);
  const Pose pad_pose{quat_from_yaw(cfg.pad.yaw_rad),
                      Vec3(cfg.pad.center.x(), cfg.pad.center.y(), cfg.pad.surface_height_m)};

  std::vector<BundleDescentSample> samples;
  std::optional<Pose> prior;
  const double dt = 1.0 / cfg.sensors.camera.rate_hz;
  const double duration = (z_start - z_end) / speed_ms;
  for (double t = 0.0; t <= duration; t += dt) {
    sim::TrueVehicleState truth;
    const double z = z_start - speed_ms * t;
    // Gentle sway and tilt so the profile is not a pure static repeat.
    truth.position = Vec3(cfg.pad.center.x() + 0.06 * std::sin(2.3 * t),
                          cfg.pad.center.y() + 0.05 * std::sin(1.4 * t + 1.0),
                          cfg.pad.surface_height_m + z);
    const Vec3 tilt(0.035 * std::sin(1.1 * t), 0.035 * std::sin(0.9 * t + 0.5), 0.2);
    truth.attitude = normalized(quat_exp(tilt));
    truth.time_s = t;
    truth.on_ground = false;

    const auto dets = suite.sample_tag_detections(truth, cfg.bundle, pad_pose);
    if (dets.empty()) {
      prior.reset();
      continue;
    }
    try {
      const auto est = vision::estimate_camera_pose(dets, cfg.bundle, cfg.sensors.camera, prior);
      prior = Pose{est.orientation, est.position};
      const Pose cam_in_landing =
          pad_pose.inverse() * Pose{truth.attitude, truth.position} * cfg.sensors.camera.mount;
      samples.push_back({cam_in_landing.translation.z(), vision::bundle_height(est)});
    } catch (const vision::VisionError&) {
      prior.reset();
    }
  }

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ofstream csv(out_dir + "/bundle_descent.csv");
    csv << "true_height_m,est_height_m\n";
    for (const auto& s : samples) {
      csv << s.true_height_m << "," << s.est_height_m << "\n";
    }
  }
  return samples;
}

void check_endurance_log(const RunLog& log, bool* fsm_ok, bool* sawtooth_ok) {
  using autonomy::MasterState;
  *fsm_ok = true;
  *sawtooth_ok = true;

  // Compressed sequence of distinct states.
  std::vector<MasterState> seq;
  for (const auto& row : log.rows) {
    if (seq.empty() || seq.back() != row.master_state) {
      seq.push_back(row.master_state);
    }
  }
  static const MasterState kCycle[] = {MasterState::kTakeoff, MasterState::kMission,
                                       MasterState::kReturnHome, MasterState::kLanding,
                                       MasterState::kCharging};
  std::size_t i = 0;
  if (!seq.empty() && seq[0] == MasterState::kCharging) {
    i = 1;
  }
  std::size_t phase = 0;
  for (; i < seq.size(); ++i) {
    if (seq[i] != kCycle[phase]) {
      *fsm_ok = false;
      break;
    }
    phase = (phase + 1) % 5;
  }

  for (std::size_t r = 1; r < log.rows.size(); ++r) {
    const auto& a = log.rows[r - 1];
    const auto& b = log.rows[r];
    if (a.master_state != b.master_state) continue;
    if (autonomy::is_airborne(a.master_state)) {
      if (b.battery_charge >= a.battery_charge) {
        *sawtooth_ok = false;
        break;
      }
    } else if (a.master_state == MasterState::kCharging) {
      const bool full = a.battery_charge >= 0.999;
      if (b.battery_charge < a.battery_charge || (!full && b.battery_charge <= a.battery_charge)) {
        *sawtooth_ok = false;
        break;
      }
    }
  }
}

EnduranceStats run_endurance(const ScenarioConfig& cfg, double hours,
                             const std::string& out_dir) {
  ScenarioConfig run_cfg = cfg;
  run_cfg.duration_s = hours * 3600.0;
  validate_config(run_cfg);

  World world(run_cfg);
  EnduranceStats stats;
  stats.summary = world.run(run_cfg.duration_s);
  stats.sorties = stats.summary.sorties;
  stats.min_battery_voltage = stats.summary.min_battery_voltage;
  check_endurance_log(world.log(), &stats.fsm_sequence_ok, &stats.sawtooth_ok);

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    world.log().write_csv(out_dir + "/runlog.csv");
    write_fsm_csv(out_dir + "/fsm.csv", world.engine().transition_log());
    std::ofstream rep(out_dir + "/endurance_summary.txt");
    rep << "sorties " << stats.sorties << "\n";
    rep << "fault " << (stats.summary.fault ? 1 : 0) << "\n";
    rep << "fault_cause " << stats.summary.fault_cause << "\n";
    rep << "min_battery_voltage " << stats.min_battery_voltage << "\n";
    rep << "fsm_sequence_ok " << (stats.fsm_sequence_ok ? 1 : 0) << "\n";
    rep << "sawtooth_ok " << (stats.sawtooth_ok ? 1 : 0) << "\n";
  }
  return stats;
}

}  // namespace sortie::scenario
