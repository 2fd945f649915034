// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "sortie/autonomy.hpp"
#include "sortie/flight_control.hpp"
#include "sortie/landing_vision.hpp"
#include "sortie/msf_ekf.hpp"
#include "sortie/sensor_sim.hpp"
#include "sortie/vehicle_sim.hpp"

namespace sortie::scenario {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SensorProfile { kIndoor, kOutdoor };

struct ScenarioConfig {
  sim::VehicleParams vehicle;
  sim::BatteryParams battery;
  sim::WindModel wind;
  sensors::SensorParams sensors;
  SensorProfile profile = SensorProfile::kOutdoor;
  sim::PadPose pad;
  vision::TagBundleSpec bundle = vision::make_default_bundle();
  std::string bundle_file;  // when set, read the bundle from this file

  autonomy::MissionSpec mission;
  autonomy::BatteryThresholds battery_thresholds;
  autonomy::TakeoffParams takeoff;
  autonomy::ReturnHomeParams return_home;
  autonomy::LandingParams landing;
  autonomy::EmergencyParams emergency;
  traj::TrajectoryLimits limits;

  ctl::TranslationGains translation_gains;
  ctl::AttitudeGains attitude_gains;
  ctl::BodyRateGains rate_gains;

  ekf::FilterTuning filter;
  ekf::InitialCalibration filter_calib;

  std::uint64_t seed = 1;
  double duration_s = 60.0;
  double time_accel = 0.0;  // 0 = free-running
  double log_rate_hz = 20.0;
  std::array<double, 4> motor_fault_scale{1, 1, 1, 1};
  std::string home_store_path = "home_record.txt";
};

// Built-in defaults: outdoor profile, default camera/bundle, a short two-leg
// acquire mission sized so the default battery model cycles ~24 sorties in a
// 4 h endurance run.
ScenarioConfig default_config();

// Defaults overridden by the YAML file (missing keys keep defaults).
ScenarioConfig load_config(const std::string& path);

// Field-path validation; throws ConfigError.
void validate_config(const ScenarioConfig& cfg);

// Applies the indoor/outdoor profile coupling (process noise mirrors the
// sensor noise; battery thresholds mirror the battery params).
void finalize_config(ScenarioConfig& cfg);

}  // namespace sortie::scenario
