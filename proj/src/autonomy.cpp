// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/autonomy.hpp"

#include <algorithm>
#include <cmath>

namespace sortie::autonomy {

const char* to_string(MasterState s) {
  switch (s) {
    case MasterState::kIdle: return "IDLE";
    case MasterState::kCharging: return "CHARGING";
    case MasterState::kTakeoff: return "TAKEOFF";
    case MasterState::kMission: return "MISSION";
    case MasterState::kReturnHome: return "RETURN_HOME";
    case MasterState::kLanding: return "LANDING";
    case MasterState::kLanded: return "LANDED";
    case MasterState::kEmergencyLanding: return "EMERGENCY_LANDING";
    case MasterState::kFault: return "FAULT";
  }
  return "?";
}

const char* to_string(EventType e) {
  switch (e) {
    case EventType::kBatteryFull: return "BatteryFull";
    case EventType::kBatteryLow: return "BatteryLow";
    case EventType::kBatteryCritical: return "BatteryCritical";
    case EventType::kTakeoffComplete: return "TakeoffComplete";
    case EventType::kMissionComplete: return "MissionComplete";
    case EventType::kArrivedHome: return "ArrivedHome";
    case EventType::kPadAcquired: return "PadAcquired";
    case EventType::kTouchdown: return "Touchdown";
    case EventType::kForceTakeoff: return "ForceTakeoff";
    case EventType::kForceLand: return "ForceLand";
    case EventType::kReturnToHome: return "ReturnToHome";
    case EventType::kEmergencyLand: return "EmergencyLand";
    case EventType::kDetectionTimeout: return "DetectionTimeout";
    case EventType::kMotorCheckFailed: return "MotorCheckFailed";
  }
  return "?";
}

std::optional<EventType> event_from_string(const std::string& name) {
  for (int i = 0; i < kEventTypeCount; ++i) {
    const auto e = static_cast<EventType>(i);
    if (name == to_string(e)) return e;
  }
  return std::nullopt;
}

std::optional<MasterState> master_state_from_string(const std::string& name) {
  for (int i = 0; i < kMasterStateCount; ++i) {
    const auto s = static_cast<MasterState>(i);
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

bool is_airborne(MasterState state) {
  return state == MasterState::kTakeoff || state == MasterState::kMission ||
         state == MasterState::kReturnHome || state == MasterState::kLanding ||
         state == MasterState::kEmergencyLanding;
}

AutopilotId autopilot_for(MasterState state) {
  switch (state) {
    case MasterState::kTakeoff: return AutopilotId::kTakeoff;
    case MasterState::kMission: return AutopilotId::kMission;
    case MasterState::kReturnHome: return AutopilotId::kReturnHome;
    case MasterState::kLanding: return AutopilotId::kLanding;
    case MasterState::kEmergencyLanding: return AutopilotId::kEmergency;
    default: return AutopilotId::kNone;
  }
}

TransitionResult master_transition(MasterState state, EventType event) {
  using MS = MasterState;
  using ET = EventType;

  if (is_airborne(state) && state != MS::kEmergencyLanding &&
      (event == ET::kBatteryCritical || event == ET::kEmergencyLand)) {
    return {MS::kEmergencyLanding, true};
  }

  switch (state) {
    case MS::kIdle:
      if (event == ET::kForceTakeoff) return {MS::kTakeoff, true};
      break;
    case MS::kCharging:
      if (event == ET::kBatteryFull || event == ET::kForceTakeoff) return {MS::kTakeoff, true};
      break;
    case MS::kTakeoff:
      if (event == ET::kTakeoffComplete) return {MS::kMission, true};
      if (event == ET::kMotorCheckFailed) return {MS::kFault, true};
      if (event == ET::kForceLand || event == ET::kReturnToHome) return {MS::kReturnHome, true};
      break;
    case MS::kMission:
      if (event == ET::kMissionComplete || event == ET::kBatteryLow ||
          event == ET::kReturnToHome || event == ET::kForceLand) {
        return {MS::kReturnHome, true};
      }
      break;
    case MS::kReturnHome:
      if (event == ET::kArrivedHome) return {MS::kLanding, true};
      break;
    case MS::kLanding:
      if (event == ET::kTouchdown) return {MS::kCharging, true};
      break;
    case MS::kLanded:
      if (event == ET::kForceTakeoff) return {MS::kTakeoff, true};
      break;
    case MS::kEmergencyLanding:
      if (event == ET::kTouchdown) return {MS::kLanded, true};
      break;
    case MS::kFault:
      break;
  }
  return {state, false};
}

// ---------------------------------------------------------------------------
// Takeoff autopilot

void TakeoffAutopilot::wake(const AutopilotInputs& in) {
  phase_ = Phase::kMotorSpin;
  phase_start_ = in.time_s;
  init_attempts_ = 0;
  ground_z_ = in.position.z();
  hold_xy_ = in.position.head<2>();
  hold_yaw_ = yaw_of(in.attitude);
  home_.reset();
}

StepResult TakeoffAutopilot::step(const AutopilotInputs& in) {
  StepResult out;
  out.guidance.ref.p_ref = Vec3(hold_xy_.x(), hold_xy_.y(), ground_z_);
  out.guidance.ref.psi_ref = hold_yaw_;

  switch (phase_) {
    case Phase::kMotorSpin: {
      out.guidance.motors_on = true;
      out.guidance.motor_test = true;
      out.guidance.motor_test_cmd = params_.idle_cmd;
      if (in.time_s - phase_start_ >= params_.spin_time_s) {
        const auto speeds = services_.motor_speeds();
        const double expected = services_.expected_motor_speed(params_.idle_cmd);
        bool ok = expected > 0.0;
        for (double w : speeds) {
          if (std::abs(w - expected) > params_.speed_tolerance * expected) ok = false;
        }
        if (!ok) {
          out.events.push_back({EventType::kMotorCheckFailed, in.time_s});
          out.guidance.motors_on = false;
          out.guidance.motor_test = false;
          phase_ = Phase::kDone;
        } else {
          phase_ = Phase::kFilterInit;
          phase_start_ = in.time_s;
        }
      }
      break;
    }
    case Phase::kFilterInit: {
      out.guidance.motors_on = false;
      if (in.time_s - phase_start_ >= 0.5 + init_attempts_ * params_.init_retry_wait_s) {
        if (services_.reinitialize_filter()) {
          phase_ = Phase::kPersistHome;
        } else {
          ++init_attempts_;
          if (init_attempts_ >= params_.max_init_retries) {
            out.fault = "takeoff: filter initialization rejected repeatedly";
          }
        }
      }
      break;
    }
    case Phase::kPersistHome: {
      out.guidance.motors_on = false;
      HomeRecord rec;
      rec.horizontal = in.position.head<2>();
      rec.takeoff_altitude = in.position.z();
      rec.timestamp = in.time_s;
      if (!services_.persist_home(rec)) {
        out.fault = "takeoff: home record could not be persisted";
        break;
      }
      home_ = rec;
      ground_z_ = in.position.z();
      hold_xy_ = rec.horizontal;
      profile_ = traj::plan_vertical_velocity_profile(ground_z_, ground_z_ + params_.safe_altitude_m,
                                                      params_.climb_speed_ms);
      phase_ = Phase::kAscend;
      phase_start_ = in.time_s;
      out.guidance.reset_translation = true;
      break;
    }
    case Phase::kAscend: {
      out.guidance.motors_on = true;
      const auto [z_ref, vz_ref] = profile_.sample(in.time_s - phase_start_);
      out.guidance.ref.p_ref = Vec3(hold_xy_.x(), hold_xy_.y(), z_ref);
      out.guidance.ref.v_ref = Vec3(0, 0, vz_ref);
      if (in.position.z() >= ground_z_ + params_.safe_altitude_m - 0.05) {
        out.events.push_back({EventType::kTakeoffComplete, in.time_s});
        phase_ = Phase::kDone;
      }
      break;
    }
    case Phase::kDone: {
      out.guidance.motors_on = true;
      out.guidance.ref.p_ref = Vec3(hold_xy_.x(), hold_xy_.y(), ground_z_ + params_.safe_altitude_m);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mission autopilot

void MissionAutopilot::wake(const AutopilotInputs& in) {
  acquiring_ = false;
  plan_error_.reset();
  plan_from(in.position, yaw_of(in.attitude), in.time_s);
}

void MissionAutopilot::plan_from(const Vec3& position, double yaw, double time_s) {
  std::vector<traj::Waypoint> wps;
  wps.push_back(traj::Waypoint{position, yaw, 0.0, traj::WaypointAction::kNone});
  wps.insert(wps.end(), spec_.waypoints.begin(), spec_.waypoints.end());
  try {
    trajectory_ = traj::plan_mission_trajectory(wps, limits_);
    start_time_ = time_s;
  } catch (const std::exception& e) {
    plan_error_ = std::string("mission planning failed: ") + e.what();
    trajectory_.reset();
  }
}

StepResult MissionAutopilot::step(const AutopilotInputs& in) {
  StepResult out;
  if (plan_error_) {
    out.fault = plan_error_;
    return out;
  }
  const double t = in.time_s - start_time_;
  bool clamped = false;
  out.guidance.ref = traj::sample_trajectory(*trajectory_, t, &clamped);
  out.guidance.motors_on = true;

  const auto [idx, local] = trajectory_->locate(std::min(t, trajectory_->total_duration()));
  (void)local;
  const auto& seg = trajectory_->segments[static_cast<std::size_t>(idx)];
  acquiring_ = seg.is_hover && seg.action == traj::WaypointAction::kAcquireData && !clamped;

  if (t >= trajectory_->total_duration()) {
    if (spec_.mode == MissionSpec::Mode::kContinuous) {
      plan_from(in.position, out.guidance.ref.psi_ref, in.time_s);
    } else {
      out.events.push_back({EventType::kMissionComplete, in.time_s});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Return-home autopilot

void ReturnHomeAutopilot::wake(const AutopilotInputs& in, const HomeRecord& home) {
  target_ = Vec3(home.horizontal.x(), home.horizontal.y(),
                 home.takeoff_altitude + params_.safe_altitude_m);
  announced_ = false;
  start_time_ = in.time_s;
  const double yaw = yaw_of(in.attitude);
  if ((in.position - target_).norm() < 0.5) {
    trajectory_.reset();  // already at the approach point
    return;
  }
  std::vector<traj::Waypoint> wps{{in.position, yaw, 0.0, traj::WaypointAction::kNone},
                                  {target_, yaw, 0.0, traj::WaypointAction::kNone}};
  trajectory_ = traj::plan_mission_trajectory(wps, limits_);
}

StepResult ReturnHomeAutopilot::step(const AutopilotInputs& in) {
  StepResult out;
  out.guidance.motors_on = true;
  const double t = in.time_s - start_time_;
  double planned = 0.0;
  if (trajectory_) {
    out.guidance.ref = traj::sample_trajectory(*trajectory_, t);
    planned = trajectory_->total_duration();
  } else {
    out.guidance.ref.p_ref = target_;
    out.guidance.ref.psi_ref = yaw_of(in.attitude);
  }
  if (!announced_) {
    const bool settled =
        t >= planned && (in.position - target_).norm() <= params_.arrival_tolerance_m;
    const bool overdue = t >= 3.0 * planned + 20.0;
    if (settled || overdue) {
      out.events.push_back({EventType::kArrivedHome, in.time_s});
      announced_ = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Landing autopilot

void LandingAutopilot::wake(const AutopilotInputs& in) {
  phase_ = Phase::kHoverDetect;
  phase_start_ = in.time_s;
  hold_point_ = in.position;
  hold_yaw_ = yaw_of(in.attitude);
  retries_ = 0;
  detect_window_.clear();
  rls_.reset();
  low_vz_since_ = -1.0;
}

StepResult LandingAutopilot::step(const AutopilotInputs& in) {
  StepResult out;
  out.guidance.motors_on = true;
  out.guidance.ref.p_ref = hold_point_;
  out.guidance.ref.psi_ref = hold_yaw_;

  switch (phase_) {
    case Phase::kHoverDetect: {
      if (in.pad_measurement) {
        detect_window_.push_back(*in.pad_measurement);
      }
      if (static_cast<int>(detect_window_.size()) >= params_.min_detections) {
        rls_ = vision::rls_initialize(detect_window_, params_.rls_lambda);
        out.events.push_back({EventType::kPadAcquired, in.time_s});
        phase_ = Phase::kAlign;
        phase_start_ = in.time_s;
      } else if (in.time_s - phase_start_ > params_.detect_timeout_s) {
        out.events.push_back({EventType::kDetectionTimeout, in.time_s});
        if (retries_ >= params_.max_retries) {
          out.events.push_back({EventType::kEmergencyLand, in.time_s});
        } else {
          ++retries_;
          hold_point_.z() += params_.retry_ascend_m;
          detect_window_.clear();
          phase_start_ = in.time_s;
        }
      }
      break;
    }
    case Phase::kAlign: {
      if (in.pad_measurement) {
        rls_update(*rls_, *in.pad_measurement, params_.measurement_sigma.cwiseAbs2().asDiagonal());
      }
      const Vec4& pad = rls_->theta;
      out.guidance.ref.p_ref = Vec3(pad.x(), pad.y(), hold_point_.z());
      out.guidance.ref.psi_ref = pad(3);
      const double lat_err = (in.position.head<2>() - pad.head<2>()).norm();
      const double yaw_err = std::abs(wrap_angle(yaw_of(in.attitude) - pad(3)));
      if (lat_err < params_.align_lateral_tol_m && yaw_err < params_.align_yaw_tol_rad) {
        phase_ = Phase::kDescend;
        descend_start_ = in.time_s;
        descent_ = traj::plan_vertical_velocity_profile(in.position.z(), pad.z(),
                                                        params_.descent_speed_ms, 0.5,
                                                        /*terminal_ramp=*/false);
        low_vz_since_ = -1.0;
      }
      break;
    }
    case Phase::kDescend: {
      if (in.pad_measurement) {
        rls_update(*rls_, *in.pad_measurement, params_.measurement_sigma.cwiseAbs2().asDiagonal());
        if (rls_->covariance.trace() > params_.covariance_abort_trace) {
          phase_ = Phase::kHoverDetect;
          phase_start_ = in.time_s;
          hold_point_ = in.position;
          detect_window_.clear();
          rls_.reset();
          break;
        }
      }
      const Vec4& pad = rls_->theta;
      const auto [z_ref, vz_ref] = descent_.sample(in.time_s - descend_start_);
      out.guidance.ref.p_ref = Vec3(pad.x(), pad.y(), z_ref);
      out.guidance.ref.v_ref = Vec3(0, 0, vz_ref);
      out.guidance.ref.psi_ref = pad(3);

      const double height = in.position.z() - pad.z();
      const bool descending = vz_ref <= -0.8 * descent_.v_peak;
      if (descending && height < params_.touchdown_height_m &&
          std::abs(in.velocity.z()) < params_.touchdown_vz_ms) {
        if (low_vz_since_ < 0.0) {
          low_vz_since_ = in.time_s;
        }
        if (in.time_s - low_vz_since_ >= params_.touchdown_hold_s) {
          out.events.push_back({EventType::kTouchdown, in.time_s});
          phase_ = Phase::kDone;
        }
      } else {
        low_vz_since_ = -1.0;
      }
      break;
    }
    case Phase::kDone: {
      out.guidance.motors_on = false;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emergency landing autopilot

void EmergencyLandingAutopilot::wake(const AutopilotInputs& in) {
  hold_xy_ = in.position.head<2>();
  hold_yaw_ = yaw_of(in.attitude);
  start_time_ = in.time_s;
  start_z_ = in.position.z();
  descent_ = traj::plan_vertical_velocity_profile(start_z_, start_z_ - 1000.0,
                                                  params_.descent_speed_ms, 0.5,
                                                  /*terminal_ramp=*/false);
  low_vz_since_ = -1.0;
  done_ = false;
}

StepResult EmergencyLandingAutopilot::step(const AutopilotInputs& in) {
  StepResult out;
  if (done_) {
    out.guidance.motors_on = false;
    out.guidance.ref.p_ref = in.position;
    return out;
  }
  const auto [z_ref, vz_ref] = descent_.sample(in.time_s - start_time_);
  out.guidance.motors_on = true;
  out.guidance.ref.p_ref = Vec3(hold_xy_.x(), hold_xy_.y(), z_ref);
  out.guidance.ref.v_ref = Vec3(0, 0, vz_ref);
  out.guidance.ref.psi_ref = hold_yaw_;

  const bool descending = vz_ref <= -0.8 * descent_.v_peak;
  if (descending && std::abs(in.velocity.z()) < params_.touchdown_vz_ms) {
    if (low_vz_since_ < 0.0) {
      low_vz_since_ = in.time_s;
    }
    if (in.time_s - low_vz_since_ >= params_.touchdown_hold_s) {
      out.events.push_back({EventType::kTouchdown, in.time_s});
      done_ = true;
      out.guidance.motors_on = false;
    }
  } else {
    low_vz_since_ = -1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine

AutonomyEngine::AutonomyEngine(const EngineConfig& config, TakeoffServices takeoff_services)
    : config_(config),
      state_(config.initial_state),
      takeoff_(config.takeoff, std::move(takeoff_services)),
      mission_(config.mission, config.limits),
      return_home_(config.return_home, config.limits),
      landing_(config.landing),
      emergency_(config.emergency) {}

void AutonomyEngine::enter_state(MasterState next, const AutopilotInputs& in) {
  state_ = next;
  active_ = autopilot_for(next);
  switch (active_) {
    case AutopilotId::kTakeoff:
      takeoff_.wake(in);
      break;
    case AutopilotId::kMission:
      mission_.wake(in);
      break;
    case AutopilotId::kReturnHome: {
      HomeRecord home;
      if (home_) {
        home = *home_;
      } else {
        home.horizontal = in.position.head<2>();
        home.takeoff_altitude = std::max(0.0, in.position.z() - config_.return_home.safe_altitude_m);
      }
      return_home_.wake(in, home);
      break;
    }
    case AutopilotId::kLanding:
      landing_.wake(in);
      break;
    case AutopilotId::kEmergency:
      emergency_.wake(in);
      break;
    case AutopilotId::kNone:
      break;
  }
  if (next == MasterState::kCharging) {
    battery_low_latched_ = false;
    battery_critical_latched_ = false;
  }
}

void AutonomyEngine::apply_event(const AutonomyEvent& ev, const AutopilotInputs& in) {
  const TransitionResult res = master_transition(state_, ev.type);
  log_.push_back({ev.time_s, state_, ev.type, res.next, res.handled});
  if (res.handled && res.next != state_) {
    if (state_ == MasterState::kLanding && res.next == MasterState::kCharging &&
        ev.type == EventType::kTouchdown) {
      ++sorties_;
    }
    enter_state(res.next, in);
  }
}

StepResult AutonomyEngine::step(const AutopilotInputs& in,
                                const std::vector<AutonomyEvent>& injected) {
  std::vector<AutonomyEvent> events;

  // Battery threshold events, edge-triggered.
  if (state_ == MasterState::kCharging && in.battery_charge >= config_.battery.full_charge) {
    events.push_back({EventType::kBatteryFull, in.time_s});
  }
  if (state_ == MasterState::kMission && !battery_low_latched_ &&
      in.battery_voltage < config_.battery.low_voltage) {
    events.push_back({EventType::kBatteryLow, in.time_s});
    battery_low_latched_ = true;
  }
  if (is_airborne(state_) && !battery_critical_latched_ &&
      in.battery_voltage < config_.battery.critical_voltage) {
    events.push_back({EventType::kBatteryCritical, in.time_s});
    battery_critical_latched_ = true;
  }

  while (!pending_.empty()) {
    events.push_back(pending_.front());
    pending_.pop_front();
  }
  events.insert(events.end(), injected.begin(), injected.end());

  if (!started_) {
    started_ = true;
    enter_state(state_, in);
  }
  for (const auto& ev : events) {
    apply_event(ev, in);
  }

  StepResult ap;
  switch (active_) {
    case AutopilotId::kTakeoff:
      ap = takeoff_.step(in);
      if (takeoff_.home()) {
        home_ = takeoff_.home();
      }
      break;
    case AutopilotId::kMission:
      ap = mission_.step(in);
      break;
    case AutopilotId::kReturnHome:
      ap = return_home_.step(in);
      break;
    case AutopilotId::kLanding:
      ap = landing_.step(in);
      break;
    case AutopilotId::kEmergency:
      ap = emergency_.step(in);
      break;
    case AutopilotId::kNone:
      ap.guidance.motors_on = false;
      ap.guidance.ref.p_ref = in.position;
      ap.guidance.ref.psi_ref = yaw_of(in.attitude);
      break;
  }

  if (ap.fault && state_ != MasterState::kFault) {
    fault_cause_ = ap.fault;
    enter_state(MasterState::kFault, in);
    ap.guidance.motors_on = false;
  }

  for (const auto& ev : ap.events) {
    pending_.push_back(ev);
  }

  StepResult out;
  out.guidance = ap.guidance;
  out.events = events;
  out.fault = ap.fault;
  return out;
}

}  // namespace sortie::autonomy
