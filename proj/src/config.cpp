// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>

namespace sortie::scenario {

namespace {

template <typename T>
void get(const YAML::Node& node, const char* key, T& out, const std::string& path) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path + "." + key + ": cannot parse value");
  }
}

void get_vec3(const YAML::Node& node, const char* key, Vec3& out, const std::string& path) {
  if (!node || !node[key]) return;
  const YAML::Node v = node[key];
  if (!v.IsSequence() || v.size() != 3) {
    throw ConfigError(path + "." + key + ": expected a 3-element sequence");
  }
  for (int i = 0; i < 3; ++i) out[i] = v[i].as<double>();
}

void get_vec2(const YAML::Node& node, const char* key, Vec2& out, const std::string& path) {
  if (!node || !node[key]) return;
  const YAML::Node v = node[key];
  if (!v.IsSequence() || v.size() != 2) {
    throw ConfigError(path + "." + key + ": expected a 2-element sequence");
  }
  for (int i = 0; i < 2; ++i) out[i] = v[i].as<double>();
}

void get_vec4(const YAML::Node& node, const char* key, Vec4& out, const std::string& path) {
  if (!node || !node[key]) return;
  const YAML::Node v = node[key];
  if (!v.IsSequence() || v.size() != 4) {
    throw ConfigError(path + "." + key + ": expected a 4-element sequence");
  }
  for (int i = 0; i < 4; ++i) out[i] = v[i].as<double>();
}

}  // namespace

ScenarioConfig default_config() {
  ScenarioConfig cfg;

  cfg.wind.mean = Vec3(0.8, 0.4, 0.0);
  cfg.wind.gust_stddev = Vec3(0.35, 0.35, 0.12);
  cfg.wind.correlation_time_s = 2.0;

  // Visibility thresholds calibrated once for the default camera: 15 cm tags
  // drop out above 4 m, 48 cm tags below 2 m.
  cfg.sensors.visibility = sensors::calibrate_visibility(cfg.sensors.camera, 0.15, 4.0, 0.48,
                                                         2.0, cfg.sensors.visibility.pixel_noise_sigma);

  // Two-leg acquire mission; leg lengths and hover times size the sortie cycle
  // for the endurance scenario.
  traj::Waypoint wp1;
  wp1.position = Vec3(30.0, 10.0, 8.0);
  wp1.yaw_rad = 0.6;
  wp1.hover_time_s = 10.0;
  wp1.action = traj::WaypointAction::kAcquireData;
  traj::Waypoint wp2;
  wp2.position = Vec3(-10.0, 25.0, 6.0);
  wp2.yaw_rad = -0.8;
  wp2.hover_time_s = 8.0;
  cfg.mission.waypoints = {wp1, wp2};
  cfg.mission.mode = autonomy::MissionSpec::Mode::kSingle;

  finalize_config(cfg);
  return cfg;
}

void finalize_config(ScenarioConfig& cfg) {
  // The filter's process noise follows the sensor models.
  cfg.filter.noise.accel_noise = cfg.sensors.imu.accel_noise;
  cfg.filter.noise.gyro_noise = cfg.sensors.imu.gyro_noise;
  cfg.filter.noise.accel_bias_rw = cfg.sensors.imu.accel_bias_rw;
  cfg.filter.noise.gyro_bias_rw = cfg.sensors.imu.gyro_bias_rw;
  cfg.filter.noise.baro_bias_rw = cfg.sensors.baro.drift_rw;

  cfg.battery_thresholds.low_voltage = cfg.battery.return_home_voltage;
  cfg.battery_thresholds.critical_voltage = cfg.battery.critical_voltage;

  cfg.landing.rls_lambda = std::clamp(cfg.landing.rls_lambda, 0.01, 1.0);

  if (cfg.profile == SensorProfile::kIndoor) {
    cfg.wind.mean.setZero();
    cfg.wind.gust_stddev.setZero();
  }

  if (!cfg.bundle_file.empty()) {
    cfg.bundle = vision::read_bundle_file(cfg.bundle_file);
  }
}

ScenarioConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: cannot load " + path + ": " + e.what());
  }

  ScenarioConfig cfg = default_config();

  get(root, "seed", cfg.seed, "");
  get(root, "duration_s", cfg.duration_s, "");
  get(root, "time_accel", cfg.time_accel, "");
  get(root, "log_rate_hz", cfg.log_rate_hz, "");
  get(root, "home_store_path", cfg.home_store_path, "");
  get(root, "bundle_file", cfg.bundle_file, "");
  if (root["profile"]) {
    const auto p = root["profile"].as<std::string>();
    if (p == "indoor") {
      cfg.profile = SensorProfile::kIndoor;
    } else if (p == "outdoor") {
      cfg.profile = SensorProfile::kOutdoor;
    } else {
      throw ConfigError("profile: expected indoor|outdoor, got " + p);
    }
  }

  if (const YAML::Node v = root["vehicle"]) {
    get(v, "mass_kg", cfg.vehicle.mass_kg, "vehicle");
    get_vec3(v, "inertia", cfg.vehicle.inertia_diag, "vehicle");
    get(v, "arm_length_m", cfg.vehicle.arm_length_m, "vehicle");
    get(v, "thrust_coeff", cfg.vehicle.thrust_coeff, "vehicle");
    get(v, "yaw_torque_coeff", cfg.vehicle.yaw_torque_coeff, "vehicle");
    get(v, "motor_time_constant_s", cfg.vehicle.motor_time_constant_s, "vehicle");
    get(v, "max_motor_thrust_n", cfg.vehicle.max_motor_thrust_n, "vehicle");
    get(v, "drag_coeff", cfg.vehicle.drag_coeff, "vehicle");
    if (v["motor_fault_scale"]) {
      const YAML::Node f = v["motor_fault_scale"];
      if (!f.IsSequence() || f.size() != 4) {
        throw ConfigError("vehicle.motor_fault_scale: expected 4 values");
      }
      for (int i = 0; i < 4; ++i) cfg.motor_fault_scale[i] = f[i].as<double>();
    }
  }

  if (const YAML::Node b = root["battery"]) {
    get(b, "v_full", cfg.battery.v_full, "battery");
    get(b, "v_empty", cfg.battery.v_empty, "battery");
    get(b, "capacity_wh", cfg.battery.capacity_wh, "battery");
    get(b, "hover_power_w", cfg.battery.hover_power_w, "battery");
    get(b, "charge_time_full_s", cfg.battery.charge_time_full_s, "battery");
    get(b, "load_sag_v", cfg.battery.load_sag_v, "battery");
    get(b, "return_home_voltage", cfg.battery.return_home_voltage, "battery");
    get(b, "critical_voltage", cfg.battery.critical_voltage, "battery");
  }

  if (const YAML::Node w = root["wind"]) {
    get_vec3(w, "mean", cfg.wind.mean, "wind");
    get_vec3(w, "gust_stddev", cfg.wind.gust_stddev, "wind");
    get(w, "correlation_time_s", cfg.wind.correlation_time_s, "wind");
  }

  if (const YAML::Node s = root["sensors"]) {
    if (const YAML::Node n = s["imu"]) {
      get(n, "accel_noise", cfg.sensors.imu.accel_noise, "sensors.imu");
      get(n, "gyro_noise", cfg.sensors.imu.gyro_noise, "sensors.imu");
      get(n, "accel_bias_rw", cfg.sensors.imu.accel_bias_rw, "sensors.imu");
      get(n, "gyro_bias_rw", cfg.sensors.imu.gyro_bias_rw, "sensors.imu");
      get_vec3(n, "accel_bias0", cfg.sensors.imu.accel_bias0, "sensors.imu");
      get_vec3(n, "gyro_bias0", cfg.sensors.imu.gyro_bias0, "sensors.imu");
    }
    if (const YAML::Node n = s["gps"]) {
      get_vec3(n, "pos_sigma", cfg.sensors.gps.pos_sigma, "sensors.gps");
      get(n, "vel_sigma", cfg.sensors.gps.vel_sigma, "sensors.gps");
      get(n, "latency_s", cfg.sensors.gps.latency_s, "sensors.gps");
      get_vec3(n, "antenna_lever_arm", cfg.sensors.gps.antenna_lever_arm, "sensors.gps");
    }
    if (const YAML::Node n = s["baro"]) {
      get(n, "sigma", cfg.sensors.baro.sigma, "sensors.baro");
      get(n, "drift_rw", cfg.sensors.baro.drift_rw, "sensors.baro");
      get(n, "offset_m", cfg.sensors.baro.offset_m, "sensors.baro");
      get_vec3(n, "sensor_lever_arm", cfg.sensors.baro.sensor_lever_arm, "sensors.baro");
    }
    if (const YAML::Node n = s["mag"]) {
      get(n, "direction_sigma", cfg.sensors.mag.direction_sigma, "sensors.mag");
      get_vec3(n, "world_field", cfg.sensors.mag.world_field, "sensors.mag");
      double yaw_deg = 0.0;
      get(n, "mount_yaw_deg", yaw_deg, "sensors.mag");
      if (yaw_deg != 0.0) cfg.sensors.mag.q_im = quat_from_yaw(yaw_deg * M_PI / 180.0);
    }
    if (const YAML::Node n = s["direct_pos"]) {
      get(n, "sigma", cfg.sensors.direct_pos.sigma, "sensors.direct_pos");
      get(n, "latency_s", cfg.sensors.direct_pos.latency_s, "sensors.direct_pos");
    }
    bool camera_changed = false;
    if (const YAML::Node n = s["camera"]) {
      int w = cfg.sensors.camera.width, h = cfg.sensors.camera.height;
      double fov = cfg.sensors.camera.fov_deg, rate = cfg.sensors.camera.rate_hz;
      get(n, "width", w, "sensors.camera");
      get(n, "height", h, "sensors.camera");
      get(n, "fov_deg", fov, "sensors.camera");
      get(n, "rate_hz", rate, "sensors.camera");
      camera_changed = w != cfg.sensors.camera.width || h != cfg.sensors.camera.height ||
                       fov != cfg.sensors.camera.fov_deg;
      cfg.sensors.camera.width = w;
      cfg.sensors.camera.height = h;
      cfg.sensors.camera.fov_deg = fov;
      cfg.sensors.camera.rate_hz = rate;
      cfg.sensors.camera.fx = cfg.sensors.camera.fy =
          0.5 * w / std::tan(0.5 * fov * M_PI / 180.0);
      cfg.sensors.camera.cx = 0.5 * w;
      cfg.sensors.camera.cy = 0.5 * h;
    }
    if (camera_changed) {
      cfg.sensors.visibility =
          sensors::calibrate_visibility(cfg.sensors.camera, 0.15, 4.0, 0.48, 2.0,
                                        cfg.sensors.visibility.pixel_noise_sigma);
    }
    if (const YAML::Node n = s["visibility"]) {
      get(n, "min_edge_px", cfg.sensors.visibility.min_edge_px, "sensors.visibility");
      get(n, "max_edge_frac", cfg.sensors.visibility.max_edge_frac, "sensors.visibility");
      get(n, "pixel_noise_sigma", cfg.sensors.visibility.pixel_noise_sigma, "sensors.visibility");
    }
  }

  if (const YAML::Node p = root["pad"]) {
    get_vec2(p, "center", cfg.pad.center, "pad");
    get(p, "surface_height_m", cfg.pad.surface_height_m, "pad");
    get(p, "yaw_rad", cfg.pad.yaw_rad, "pad");
    get(p, "size_m", cfg.pad.size_m, "pad");
  }

  if (const YAML::Node m = root["mission"]) {
    if (m["mode"]) {
      const auto mode = m["mode"].as<std::string>();
      if (mode == "single") {
        cfg.mission.mode = autonomy::MissionSpec::Mode::kSingle;
      } else if (mode == "continuous") {
        cfg.mission.mode = autonomy::MissionSpec::Mode::kContinuous;
      } else {
        throw ConfigError("mission.mode: expected single|continuous");
      }
    }
    if (m["waypoints"]) {
      cfg.mission.waypoints.clear();
      for (const YAML::Node wn : m["waypoints"]) {
        traj::Waypoint wp;
        get_vec3(wn, "pos", wp.position, "mission.waypoints[]");
        get(wn, "yaw", wp.yaw_rad, "mission.waypoints[]");
        get(wn, "hover_s", wp.hover_time_s, "mission.waypoints[]");
        if (wn["action"]) {
          const auto a = wn["action"].as<std::string>();
          if (a == "acquire_data") {
            wp.action = traj::WaypointAction::kAcquireData;
          } else if (a != "none") {
            throw ConfigError("mission.waypoints[].action: expected acquire_data|none");
          }
        }
        cfg.mission.waypoints.push_back(wp);
      }
    }
  }

  if (const YAML::Node l = root["limits"]) {
    get(l, "v_max", cfg.limits.v_max, "limits");
    get(l, "a_max", cfg.limits.a_max, "limits");
  }

  if (const YAML::Node t = root["takeoff"]) {
    get(t, "safe_altitude_m", cfg.takeoff.safe_altitude_m, "takeoff");
    get(t, "climb_speed_ms", cfg.takeoff.climb_speed_ms, "takeoff");
    get(t, "idle_cmd", cfg.takeoff.idle_cmd, "takeoff");
    get(t, "spin_time_s", cfg.takeoff.spin_time_s, "takeoff");
    get(t, "speed_tolerance", cfg.takeoff.speed_tolerance, "takeoff");
  }
  if (const YAML::Node r = root["return_home"]) {
    get(r, "safe_altitude_m", cfg.return_home.safe_altitude_m, "return_home");
    get(r, "arrival_tolerance_m", cfg.return_home.arrival_tolerance_m, "return_home");
  }
  if (const YAML::Node l = root["landing"]) {
    get(l, "min_detections", cfg.landing.min_detections, "landing");
    get(l, "detect_timeout_s", cfg.landing.detect_timeout_s, "landing");
    get(l, "max_retries", cfg.landing.max_retries, "landing");
    get(l, "retry_ascend_m", cfg.landing.retry_ascend_m, "landing");
    get(l, "align_yaw_tol_rad", cfg.landing.align_yaw_tol_rad, "landing");
    get(l, "align_lateral_tol_m", cfg.landing.align_lateral_tol_m, "landing");
    get(l, "descent_speed_ms", cfg.landing.descent_speed_ms, "landing");
    get(l, "touchdown_height_m", cfg.landing.touchdown_height_m, "landing");
    get(l, "touchdown_vz_ms", cfg.landing.touchdown_vz_ms, "landing");
    get(l, "touchdown_hold_s", cfg.landing.touchdown_hold_s, "landing");
    get(l, "rls_lambda", cfg.landing.rls_lambda, "landing");
    get_vec4(l, "measurement_sigma", cfg.landing.measurement_sigma, "landing");
    get(l, "covariance_abort_trace", cfg.landing.covariance_abort_trace, "landing");
  }
  if (const YAML::Node e = root["emergency"]) {
    get(e, "descent_speed_ms", cfg.emergency.descent_speed_ms, "emergency");
    get(e, "touchdown_vz_ms", cfg.emergency.touchdown_vz_ms, "emergency");
    get(e, "touchdown_hold_s", cfg.emergency.touchdown_hold_s, "emergency");
  }

  if (const YAML::Node c = root["control"]) {
    if (const YAML::Node n = c["translation"]) {
      get_vec3(n, "kp", cfg.translation_gains.kp, "control.translation");
      get_vec3(n, "ki", cfg.translation_gains.ki, "control.translation");
      get_vec3(n, "kd", cfg.translation_gains.kd, "control.translation");
      get(n, "integrator_limit", cfg.translation_gains.integrator_limit, "control.translation");
      get(n, "prefilter_tau_s", cfg.translation_gains.prefilter_tau_s, "control.translation");
    }
    if (const YAML::Node n = c["attitude"]) {
      get(n, "tau_tilt_s", cfg.attitude_gains.tau_tilt_s, "control.attitude");
      get(n, "tau_yaw_s", cfg.attitude_gains.tau_yaw_s, "control.attitude");
    }
    if (const YAML::Node n = c["body_rate"]) {
      get_vec3(n, "k_omega", cfg.rate_gains.k_omega, "control.body_rate");
    }
  }

  if (const YAML::Node f = root["filter"]) {
    get(f, "gate_scale", cfg.filter.gate_scale, "filter");
    get(f, "buffer_horizon_s", cfg.filter.buffer_horizon_s, "filter");
    get(f, "init_accel_var_max", cfg.filter.init_accel_var_max, "filter");
    get(f, "vel_drive", cfg.filter.noise.vel_drive, "filter");
    get(f, "att_drive", cfg.filter.noise.att_drive, "filter");
    get(f, "pos_drive", cfg.filter.noise.pos_drive, "filter");
    get(f, "mw_rw", cfg.filter.noise.mw_rw, "filter");
    if (const YAML::Node n = f["init_sigma"]) {
      get_vec3(n, "p", cfg.filter.init.p, "filter.init_sigma");
      get(n, "v", cfg.filter.init.v, "filter.init_sigma");
      get(n, "tilt", cfg.filter.init.tilt, "filter.init_sigma");
      get(n, "yaw", cfg.filter.init.yaw, "filter.init_sigma");
      get(n, "gyro_bias", cfg.filter.init.gyro_bias, "filter.init_sigma");
      get(n, "accel_bias", cfg.filter.init.accel_bias, "filter.init_sigma");
      get(n, "baro_bias", cfg.filter.init.baro_bias, "filter.init_sigma");
    }
    if (const YAML::Node n = f["calibration"]) {
      get_vec3(n, "p_ig", cfg.filter_calib.p_ig, "filter.calibration");
      get_vec3(n, "m_w", cfg.filter_calib.m_w, "filter.calibration");
      get_vec3(n, "p_ip", cfg.filter_calib.p_ip, "filter.calibration");
      double yaw_deg = 0.0;
      get(n, "q_im_yaw_deg", yaw_deg, "filter.calibration");
      if (yaw_deg != 0.0) cfg.filter_calib.q_im = quat_from_yaw(yaw_deg * M_PI / 180.0);
    }
  }

  finalize_config(cfg);
  validate_config(cfg);
  return cfg;
}

void validate_config(const ScenarioConfig& cfg) {
  if (!cfg.vehicle.valid()) {
    throw ConfigError("vehicle: all physical parameters must be strictly positive");
  }
  if (!(cfg.battery.v_empty < cfg.battery.critical_voltage &&
        cfg.battery.critical_voltage < cfg.battery.return_home_voltage &&
        cfg.battery.return_home_voltage < cfg.battery.v_full)) {
    throw ConfigError("battery: require v_empty < critical < return_home < v_full");
  }
  if (cfg.battery.capacity_wh <= 0 || cfg.battery.hover_power_w <= 0 ||
      cfg.battery.charge_time_full_s <= 0) {
    throw ConfigError("battery: capacity, power and charge time must be positive");
  }
  if (cfg.wind.gust_stddev.minCoeff() < 0 || cfg.wind.correlation_time_s <= 0) {
    throw ConfigError("wind: gust_stddev must be >= 0 and correlation_time_s > 0");
  }
  if (!cfg.sensors.camera.valid()) {
    throw ConfigError("sensors.camera: invalid intrinsics");
  }
  if (cfg.sensors.visibility.min_edge_px <= 0 || cfg.sensors.visibility.max_edge_frac <= 0) {
    throw ConfigError("sensors.visibility: thresholds must be positive");
  }
  if (cfg.pad.size_m <= 0) {
    throw ConfigError("pad.size_m: must be positive");
  }
  if (cfg.mission.waypoints.empty()) {
    throw ConfigError("mission.waypoints: must not be empty");
  }
  if (cfg.limits.v_max <= 0 || cfg.limits.a_max <= 0) {
    throw ConfigError("limits: v_max and a_max must be positive");
  }
  if (cfg.landing.descent_speed_ms <= 0 || cfg.landing.min_detections < 1) {
    throw ConfigError("landing: descent speed must be positive and min_detections >= 1");
  }
  if (cfg.duration_s <= 0) {
    throw ConfigError("duration_s: must be positive");
  }
  if (cfg.log_rate_hz <= 0 || cfg.log_rate_hz > 1000) {
    throw ConfigError("log_rate_hz: must be in (0, 1000]");
  }
  for (const auto& t : cfg.bundle.tags) {
    if (t.edge_size_m <= 0) {
      throw ConfigError("bundle: tag edge sizes must be positive");
    }
  }
}

}  // namespace sortie::scenario
