// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "sortie/autonomy.hpp"
#include "sortie/landing_vision.hpp"
#include "sortie/msf_ekf.hpp"
#include "sortie/sensor_sim.hpp"
#include "sortie/vehicle_sim.hpp"

namespace sortie::scenario {

EventScript load_event_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_event_script: cannot open " + path);
  }
  EventScript script;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    ScriptedEvent ev;
    if (!(ss >> ev.time_s >> ev.name)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::runtime_error("load_event_script: malformed line " + std::to_string(lineno));
    }
    const bool occlusion = ev.name == "CameraOcclusionOn" || ev.name == "CameraOcclusionOff";
    if (!occlusion && !autonomy::event_from_string(ev.name)) {
      throw std::runtime_error("load_event_script: unknown event '" + ev.name + "' on line " +
                               std::to_string(lineno));
    }
    script.push_back(ev);
  }
  std::stable_sort(script.begin(), script.end(),
                   [](const ScriptedEvent& a, const ScriptedEvent& b) { return a.time_s < b.time_s; });
  return script;
}

namespace {

// Integer-Hz scheduler on the 1 kHz tick grid.
struct Rate {
  int hz = 1;
  std::int64_t count = 0;
  std::int64_t origin = 0;

  void reset(int rate_hz, std::int64_t origin_tick) {
    hz = rate_hz;
    count = 0;
    origin = origin_tick;
  }
  bool due(std::int64_t tick) {
    const std::int64_t next = origin + ((count + 1) * 1000 + hz - 1) / hz;
    if (tick >= next) {
      ++count;
      return true;
    }
    return false;
  }
};

}  // namespace

struct World::Impl {
  explicit Impl(const ScenarioConfig& config)
      : cfg(config),
        wind(config.wind, config.seed ^ 0x9d2c5680ULL),
        suite(config.sensors, config.seed) {
    pad_pose = Pose{quat_from_yaw(cfg.pad.yaw_rad),
                    Vec3(cfg.pad.center.x(), cfg.pad.center.y(), cfg.pad.surface_height_m)};

    truth.position = Vec3(cfg.pad.center.x(), cfg.pad.center.y(), cfg.pad.surface_height_m);
    truth.attitude = quat_from_yaw(0.4);
    truth.on_ground = true;

    battery.voltage = cfg.battery.v_full;
    battery.charge = 1.0;
    battery.mode = sim::BatteryMode::kIdle;

    ekf = std::make_unique<ekf::MsfEkf>(cfg.filter);
    controller = std::make_unique<ctl::CascadedController>(cfg.translation_gains,
                                                           cfg.attitude_gains, cfg.rate_gains,
                                                           cfg.vehicle);
    make_engine(autonomy::MasterState::kCharging);

    base_power_w = 8.0;
    power_coeff = (cfg.battery.hover_power_w - base_power_w) /
                  std::pow(cfg.vehicle.hover_thrust(), 1.5);

    // Pre-roll: fill the static sensor histories and bring the filter up so
    // the autonomy engine sees estimates from t = 0.
    const std::int64_t preroll = 11000;
    tick = -preroll;
    reset_rates();
    truth.time_s = static_cast<double>(tick) * 1e-3;
    for (; tick < 0; ++tick) {
      step_tick(nullptr);
    }
    reinitialize_filter();
    reset_rates();  // rate counters restart at t = 0 so sample times align
  }

  void reset_rates() {
    rate_imu.reset(static_cast<int>(cfg.sensors.imu.rate_hz), tick);
    rate_mag.reset(static_cast<int>(cfg.sensors.mag.rate_hz), tick);
    rate_gps.reset(static_cast<int>(cfg.sensors.gps.rate_hz), tick);
    rate_baro.reset(static_cast<int>(cfg.sensors.baro.rate_hz), tick);
    rate_dpos.reset(static_cast<int>(cfg.sensors.direct_pos.rate_hz), tick);
    rate_cam.reset(static_cast<int>(cfg.sensors.camera.rate_hz), tick);
    rate_guidance.reset(20, tick);
    rate_log.reset(static_cast<int>(cfg.log_rate_hz), tick);
  }

  void make_engine(autonomy::MasterState initial) {
    autonomy::EngineConfig ec;
    ec.initial_state = initial;
    ec.battery = cfg.battery_thresholds;
    ec.takeoff = cfg.takeoff;
    ec.return_home = cfg.return_home;
    ec.landing = cfg.landing;
    ec.emergency = cfg.emergency;
    ec.mission = cfg.mission;
    ec.limits = cfg.limits;

    autonomy::TakeoffServices services;
    services.motor_speeds = [this] { return truth.motor_speeds; };
    services.expected_motor_speed = [this](double cmd) {
      return sim::motor_calibration_map(cfg.vehicle, cmd).speed_rad_s;
    };
    services.reinitialize_filter = [this] { return reinitialize_filter(); };
    services.persist_home = [this](const autonomy::HomeRecord& rec) {
      try {
        autonomy::home_store_persist(cfg.home_store_path, rec);
        const autonomy::HomeRecord back = autonomy::home_store_load(cfg.home_store_path);
        return (back.horizontal - rec.horizontal).norm() < 1e-6;
      } catch (const std::exception&) {
        return false;
      }
    };
    engine = std::make_unique<autonomy::AutonomyEngine>(ec, std::move(services));
  }

  bool reinitialize_filter() {
    const std::size_t need = static_cast<std::size_t>(10.0 * cfg.sensors.imu.rate_hz);
    if (imu_hist.size() < need || mag_hist.empty()) {
      return false;
    }
    std::vector<sensors::ImuSample> imu_window(imu_hist.end() - static_cast<long>(need),
                                               imu_hist.end());
    std::vector<sensors::MagSample> mag_window(mag_hist.begin(), mag_hist.end());

    Vec3 fix;
    bool at_antenna = false;
    if (cfg.profile == SensorProfile::kOutdoor) {
      if (!last_gps) return false;
      fix = last_gps->position;
      at_antenna = true;
    } else {
      if (!last_dpos) return false;
      fix = last_dpos->position;
    }
    if (!last_baro) return false;

    try {
      ekf->initialize(imu_window, fix, at_antenna, last_baro->height_m, mag_window,
                      cfg.filter_calib, truth.time_s);
      pending_meas.clear();
      return true;
    } catch (const ekf::FilterInitError&) {
      return false;
    }
  }

  void enqueue(ekf::MeasurementKind kind, const Eigen::VectorXd& value,
               const Eigen::MatrixXd& noise, double sample_time, double latency,
               const std::optional<Vec3>& gyro_raw = std::nullopt) {
    if (!ekf->initialized()) return;
    ekf::Measurement m;
    m.kind = kind;
    m.value = value;
    m.noise = noise;
    m.time_s = sample_time;
    m.gyro_raw = gyro_raw;
    const auto deliver = tick + static_cast<std::int64_t>(std::llround(latency * 1000.0));
    pending_meas.push_back({deliver, std::move(m)});
  }

  void sample_sensors() {
    if (rate_imu.due(tick)) {
      const sensors::ImuSample imu = suite.sample_imu(truth);
      imu_hist.push_back(imu);
      if (imu_hist.size() > 2200) imu_hist.pop_front();
      last_imu = imu;
      if (ekf->initialized()) {
        ekf->propagate(imu, 1.0 / cfg.sensors.imu.rate_hz);
      }
    }
    if (rate_mag.due(tick)) {
      const sensors::MagSample mag = suite.sample_mag(truth);
      mag_hist.push_back(mag);
      if (mag_hist.size() > 200) mag_hist.pop_front();
      const double s = cfg.sensors.mag.direction_sigma;
      enqueue(ekf::MeasurementKind::kMag3d, mag.field,
              Eigen::Matrix3d::Identity() * s * s, mag.time_s, 0.0);
    }
    if (cfg.profile == SensorProfile::kOutdoor) {
      if (rate_gps.due(tick)) {
        const sensors::GpsSample gps = suite.sample_gps(truth);
        last_gps = gps;
        enqueue(ekf::MeasurementKind::kGpsPos, gps.position,
                cfg.sensors.gps.pos_sigma.cwiseAbs2().asDiagonal(), gps.time_s,
                cfg.sensors.gps.latency_s, last_imu ? std::optional<Vec3>(last_imu->gyro)
                                                    : std::nullopt);
        const double vs = cfg.sensors.gps.vel_sigma;
        enqueue(ekf::MeasurementKind::kGpsVel2d, gps.velocity_2d,
                Eigen::Matrix2d::Identity() * vs * vs, gps.time_s, cfg.sensors.gps.latency_s,
                last_imu ? std::optional<Vec3>(last_imu->gyro) : std::nullopt);
      }
    } else {
      if (rate_dpos.due(tick)) {
        const sensors::DirectPosSample dp = suite.sample_direct_pos(truth);
        last_dpos = dp;
        const double s = cfg.sensors.direct_pos.sigma;
        enqueue(ekf::MeasurementKind::kDirectPos, dp.position,
                Eigen::Matrix3d::Identity() * s * s, dp.time_s,
                cfg.sensors.direct_pos.latency_s);
      }
    }
    if (rate_baro.due(tick)) {
      const sensors::BaroSample baro = suite.sample_baro(truth);
      last_baro = baro;
      Eigen::VectorXd v(1);
      v(0) = baro.height_m;
      Eigen::MatrixXd r(1, 1);
      r(0, 0) = cfg.sensors.baro.sigma * cfg.sensors.baro.sigma;
      enqueue(ekf::MeasurementKind::kPressureHeight, v, r, baro.time_s, 0.0);
    }
  }

  void sample_vision() {
    if (!rate_cam.due(tick)) return;
    pad_measurement.reset();
    const bool active = engine->state() == autonomy::MasterState::kLanding;
    if (!active || !ekf->initialized()) return;

    const vision::TagDetectionSet dets = suite.sample_tag_detections(truth, cfg.bundle, pad_pose);
    if (dets.empty()) return;
    std::optional<Pose> prior;
    if (last_cam_pose && truth.time_s - last_cam_pose_time < 1.0) {
      prior = last_cam_pose;
    }
    try {
      const vision::CameraPoseEstimate est =
          vision::estimate_camera_pose(dets, cfg.bundle, cfg.sensors.camera, prior);
      last_cam_pose = Pose{est.orientation, est.position};
      last_cam_pose_time = truth.time_s;
      const ekf::FilterState& fs = ekf->state();
      const Pose body_in_world{fs.q_wi, fs.p_wi};
      pad_measurement =
          vision::pad_pose_measurement(est, body_in_world, cfg.sensors.camera.mount);
    } catch (const vision::VisionError&) {
      // frame unusable; keep descending on the held estimate
    }
  }

  void step_guidance(const EventScript* script) {
    if (!rate_guidance.due(tick)) return;
    const double t = static_cast<double>(tick) * 1e-3;

    std::vector<autonomy::AutonomyEvent> injected;
    if (script != nullptr) {
      while (script_idx < script->size() && (*script)[script_idx].time_s <= t + 1e-9) {
        const auto& ev = (*script)[script_idx];
        if (ev.name == "CameraOcclusionOn") {
          suite.set_occluded(true);
        } else if (ev.name == "CameraOcclusionOff") {
          suite.set_occluded(false);
        } else {
          injected.push_back({*autonomy::event_from_string(ev.name), t});
        }
        ++script_idx;
      }
    }

    const ekf::FilterState& fs = ekf->state();
    autonomy::AutopilotInputs in;
    in.time_s = t;
    in.dt = 0.05;
    in.position = fs.p_wi;
    in.velocity = fs.v_wi;
    in.attitude = fs.q_wi;
    in.battery_voltage = battery.voltage;
    in.battery_charge = battery.charge;
    in.pad_measurement = pad_measurement;

    const autonomy::MasterState prev = engine->state();
    const autonomy::StepResult res = engine->step(in, injected);
    guidance = res.guidance;

    if (guidance.reset_translation) {
      controller->reset(fs.p_wi, fs.v_wi);
    }
    controller->step_guidance(guidance.ref, fs.p_wi, fs.v_wi, 0.05);

    events_cell.clear();
    for (const auto& ev : res.events) {
      if (!events_cell.empty()) events_cell += ';';
      events_cell += autonomy::to_string(ev.type);
    }

    const autonomy::MasterState now = engine->state();
    if (prev != now &&
        ((prev == autonomy::MasterState::kLanding && now == autonomy::MasterState::kCharging) ||
         (prev == autonomy::MasterState::kEmergencyLanding &&
          now == autonomy::MasterState::kLanded))) {
      touchdowns.push_back(truth.position.head<2>() - cfg.pad.center);
    }
  }

  void step_actuation_and_plant() {
    std::array<double, 4> cmds{0, 0, 0, 0};
    if (tick >= 0 && guidance.motors_on) {
      if (guidance.motor_test) {
        const double f = sim::motor_calibration_map(cfg.vehicle, guidance.motor_test_cmd).thrust_n;
        cmds = {f, f, f, f};
      } else if (ekf->initialized()) {
        const ekf::FilterState& fs = ekf->state();
        const Vec3 omega_est = last_imu ? Vec3(last_imu->gyro - fs.gyro_bias) : Vec3::Zero();
        const ctl::ControlDiagnostics diag = controller->step_inner(fs.q_wi, omega_est);
        cmds = diag.motors.f_ref;
        for (double f : cmds) {
          if (f < -1e-9 || f > cfg.vehicle.max_motor_thrust_n + 1e-9) {
            throw std::logic_error("mixer produced an out-of-range motor command");
          }
        }
      }
    }
    last_cmds = cmds;

    const Vec3 w = wind.step(1e-3);
    truth = sim::step_dynamics(truth, cmds, w, cfg.vehicle, 1e-3, cfg.motor_fault_scale);
    truth = sim::pad_contact(truth, cfg.pad, cfg.vehicle);
  }

  void step_battery() {
    const bool charging = engine->state() == autonomy::MasterState::kCharging &&
                          truth.on_ground &&
                          cfg.pad.contains(truth.position.head<2>());
    double thrust = 0.0;
    for (double w : truth.motor_speeds) {
      thrust += cfg.vehicle.thrust_coeff * w * w;
    }
    battery.mode = charging ? sim::BatteryMode::kCharging : sim::BatteryMode::kDischarging;
    const double power = base_power_w + power_coeff * std::pow(thrust, 1.5);
    battery = sim::battery_step(battery, cfg.battery, power, 1e-3);
    min_voltage = std::min(min_voltage, battery.voltage);
  }

  void step_log() {
    if (!rate_log.due(tick)) return;
    if (tick < 0) return;
    RunLogRow row;
    row.time_s = truth.time_s;
    row.master_state = engine->state();
    row.p_true = truth.position;
    row.v_true = truth.velocity;
    row.yaw_true = yaw_of(truth.attitude);
    const ekf::FilterState& fs = ekf->state();
    row.p_est = fs.p_wi;
    row.v_est = fs.v_wi;
    row.yaw_est = yaw_of(fs.q_wi);
    row.battery_voltage = battery.voltage;
    row.battery_charge = battery.charge;
    row.motor_cmd = last_cmds;
    row.events = events_cell;
    events_cell.clear();
    log.rows.push_back(row);

    if (ekf->initialized()) {
      const double e2 = (fs.p_wi - truth.position).squaredNorm();
      err_accum += e2;
      err_count += 1;
    }
  }

  void step_tick(const EventScript* script) {
    sample_sensors();
    deliver_due_measurements_filtered();
    if (tick >= 0) {
      sample_vision();
      step_guidance(script);
    }
    step_actuation_and_plant();
    step_battery();
    if (tick >= 0) {
      step_log();
    }
  }

  // Removes delivered entries while preserving order.
  void deliver_due_measurements_filtered() {
    if (pending_meas.empty()) return;
    std::size_t w = 0;
    for (std::size_t r = 0; r < pending_meas.size(); ++r) {
      if (pending_meas[r].first <= tick && ekf->initialized()) {
        const ekf::UpdateOutcome out = ekf->process_measurement(pending_meas[r].second);
        if (!out.dropped) {
          nis_rows.push_back({out.time_s, out.kind, out.nis, out.dof, out.accepted});
        }
      } else {
        if (w != r) pending_meas[w] = std::move(pending_meas[r]);
        ++w;
      }
    }
    pending_meas.resize(w);
  }

  ScenarioConfig cfg;
  sim::TrueVehicleState truth;
  sim::BatteryState battery;
  sim::WindSim wind;
  sensors::SensorSuite suite;
  std::unique_ptr<ekf::MsfEkf> ekf;
  std::unique_ptr<ctl::CascadedController> controller;
  std::unique_ptr<autonomy::AutonomyEngine> engine;
  Pose pad_pose;

  std::int64_t tick = 0;
  Rate rate_imu, rate_mag, rate_gps, rate_baro, rate_dpos, rate_cam, rate_guidance, rate_log;
  std::size_t script_idx = 0;

  std::deque<sensors::ImuSample> imu_hist;
  std::deque<sensors::MagSample> mag_hist;
  std::optional<sensors::ImuSample> last_imu;
  std::optional<sensors::GpsSample> last_gps;
  std::optional<sensors::BaroSample> last_baro;
  std::optional<sensors::DirectPosSample> last_dpos;
  std::vector<std::pair<std::int64_t, ekf::Measurement>> pending_meas;

  std::optional<Vec4> pad_measurement;
  std::optional<Pose> last_cam_pose;
  double last_cam_pose_time = -1e9;

  autonomy::GuidanceOutput guidance;
  std::array<double, 4> last_cmds{0, 0, 0, 0};
  std::string events_cell;

  RunLog log;
  std::vector<NisLogRow> nis_rows;
  std::vector<Vec2> touchdowns;
  double base_power_w = 8.0;
  double power_coeff = 0.0;
  double min_voltage = 1e9;
  double err_accum = 0.0;
  std::int64_t err_count = 0;
};

World::World(const ScenarioConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
World::~World() = default;

RunSummary World::run(double duration_s, const EventScript& script) {
  Impl& w = *impl_;
  const std::int64_t end_tick = w.tick + static_cast<std::int64_t>(std::llround(duration_s * 1000.0));
  w.script_idx = 0;

  const auto wall_start = std::chrono::steady_clock::now();
  while (w.tick < end_tick) {
    w.step_tick(&script);
    ++w.tick;
    if (w.engine->state() == autonomy::MasterState::kFault) {
      break;
    }
    if (w.cfg.time_accel > 0.0 && (w.tick % 200) == 0) {
      const double sim_elapsed = static_cast<double>(w.tick) * 1e-3;
      const double wall_target = sim_elapsed / w.cfg.time_accel;
      const double wall_now =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
      if (wall_now < wall_target) {
        std::this_thread::sleep_for(std::chrono::duration<double>(wall_target - wall_now));
      }
    }
  }

  RunSummary summary;
  summary.fault = w.engine->state() == autonomy::MasterState::kFault;
  if (summary.fault && w.engine->fault_cause()) {
    summary.fault_cause = *w.engine->fault_cause();
  }
  summary.finished = !summary.fault;
  summary.duration_s = static_cast<double>(w.tick) * 1e-3;
  summary.sorties = w.engine->completed_sorties();
  summary.min_battery_voltage = w.min_voltage;
  summary.rms_position_error =
      w.err_count > 0 ? std::sqrt(w.err_accum / static_cast<double>(w.err_count)) : 0.0;
  summary.touchdowns = w.touchdowns;
  return summary;
}

void World::start_airborne_approach(const Vec3& position, double yaw,
                                    const autonomy::HomeRecord& home) {
  Impl& w = *impl_;
  w.truth.position = position;
  w.truth.velocity.setZero();
  w.truth.attitude = quat_from_yaw(yaw);
  w.truth.body_rates.setZero();
  w.truth.on_ground = false;
  const double hover_speed =
      std::sqrt(w.cfg.vehicle.hover_thrust() / 4.0 / w.cfg.vehicle.thrust_coeff);
  w.truth.motor_speeds = {hover_speed, hover_speed, hover_speed, hover_speed};
  w.truth.accel_world.setZero();
  w.suite.reset_motion_reference();

  ekf::FilterState fs;
  fs.p_wi = position;
  fs.v_wi.setZero();
  fs.q_wi = w.truth.attitude;
  fs.gyro_bias.setZero();
  fs.accel_bias.setZero();
  fs.p_ig = w.cfg.filter_calib.p_ig;
  fs.q_im = w.cfg.filter_calib.q_im;
  fs.m_w = w.cfg.filter_calib.m_w.normalized();
  fs.p_ip = w.cfg.filter_calib.p_ip;
  fs.time_s = w.truth.time_s;
  // One baro probe pins the pressure datum, as the ground init would.
  const sensors::BaroSample baro = w.suite.sample_baro(w.truth);
  fs.baro_bias = baro.height_m - (fs.p_wi + fs.q_wi.toRotationMatrix() * fs.p_ip).z();

  ekf::ErrorCov cov = ekf::ErrorCov::Zero();
  ekf::InitSigmas is = w.cfg.filter.init;
  is.p = Vec3(0.5, 0.5, 0.5);
  ekf::ErrorVec sigmas;
  sigmas << is.p, Vec3::Constant(is.v), Vec3(is.tilt, is.tilt, is.yaw),
      Vec3::Constant(is.gyro_bias), Vec3::Constant(is.accel_bias), Vec3::Constant(is.p_ig),
      Vec3::Constant(is.theta_im), Vec3::Constant(is.m_w), is.baro_bias, Vec3::Constant(is.p_ip);
  cov = sigmas.cwiseAbs2().asDiagonal();
  w.ekf->set_state(fs, cov);
  w.pending_meas.clear();

  w.make_engine(autonomy::MasterState::kReturnHome);
  w.engine->preset_home(home);
  w.controller->reset(position, Vec3::Zero());
}

const sim::TrueVehicleState& World::truth() const { return impl_->truth; }
const ekf::MsfEkf& World::estimator() const { return *impl_->ekf; }
const autonomy::AutonomyEngine& World::engine() const { return *impl_->engine; }
const sim::BatteryState& World::battery() const { return impl_->battery; }
const ScenarioConfig& World::config() const { return impl_->cfg; }
RunLog& World::log() { return impl_->log; }
const std::vector<NisLogRow>& World::nis_log() const { return impl_->nis_rows; }

}  // namespace sortie::scenario
