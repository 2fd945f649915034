// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sortie/geometry.hpp"
#include "sortie/landing_vision.hpp"
#include "sortie/trajectory_gen.hpp"

namespace sortie::autonomy {

enum class MasterState {
  kIdle,
  kCharging,
  kTakeoff,
  kMission,
  kReturnHome,
  kLanding,
  kLanded,
  kEmergencyLanding,
  kFault,
};

enum class EventType {
  kBatteryFull,
  kBatteryLow,
  kBatteryCritical,
  kTakeoffComplete,
  kMissionComplete,
  kArrivedHome,
  kPadAcquired,
  kTouchdown,
  kForceTakeoff,
  kForceLand,
  kReturnToHome,
  kEmergencyLand,
  kDetectionTimeout,
  kMotorCheckFailed,
};

inline constexpr int kMasterStateCount = 9;
inline constexpr int kEventTypeCount = 14;

const char* to_string(MasterState s);
const char* to_string(EventType e);
std::optional<EventType> event_from_string(const std::string& name);
std::optional<MasterState> master_state_from_string(const std::string& name);

struct AutonomyEvent {
  EventType type = EventType::kBatteryFull;
  double time_s = 0.0;
};

enum class AutopilotId { kNone, kTakeoff, kMission, kReturnHome, kLanding, kEmergency };

// Master transition table. handled == false means the pair is an explicit
// ignore; every (state, event) pair is defined one way or the other.
struct TransitionResult {
  MasterState next;
  bool handled = false;
};
TransitionResult master_transition(MasterState state, EventType event);
bool is_airborne(MasterState state);
AutopilotId autopilot_for(MasterState state);

struct HomeRecord {
  Vec2 horizontal{0, 0};
  double takeoff_altitude = 0.0;
  double timestamp = 0.0;
};

class HomeStoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Durable single-record store with a CRC32 footer; write-then-rename.
void home_store_persist(const std::string& path, const HomeRecord& record);
HomeRecord home_store_load(const std::string& path);
std::uint32_t crc32(const void* data, std::size_t len);

struct MissionSpec {
  std::vector<traj::Waypoint> waypoints;
  enum class Mode { kSingle, kContinuous } mode = Mode::kSingle;
};

// Estimator view handed to the autopilots each guidance tick.
struct AutopilotInputs {
  double time_s = 0.0;
  double dt = 0.05;
  Vec3 position{0, 0, 0};
  Vec3 velocity{0, 0, 0};
  Quat attitude{1, 0, 0, 0};
  double battery_voltage = 12.6;
  double battery_charge = 1.0;
  std::optional<Vec4> pad_measurement;  // world-frame pad pose from vision
};

struct GuidanceOutput {
  traj::FlatSample ref;
  bool motors_on = false;
  // Motor-test mode bypasses the cascade and drives all motors at a
  // normalized command (takeoff pre-flight check).
  bool motor_test = false;
  double motor_test_cmd = 0.0;
  bool reset_translation = false;  // ask the outer loop to re-prime
};

struct StepResult {
  GuidanceOutput guidance;
  std::vector<AutonomyEvent> events;
  std::optional<std::string> fault;
};

struct TakeoffParams {
  double idle_cmd = 0.12;
  double spin_time_s = 1.0;
  double speed_tolerance = 0.15;  // relative
  double init_retry_wait_s = 2.0;
  int max_init_retries = 3;
  double safe_altitude_m = 4.0;
  double climb_speed_ms = 1.0;
};

// Plant/estimator services the takeoff sequence needs from the host.
struct TakeoffServices {
  std::function<std::array<double, 4>()> motor_speeds;
  std::function<double(double)> expected_motor_speed;  // normalized cmd -> rad/s
  std::function<bool()> reinitialize_filter;
  std::function<bool(const HomeRecord&)> persist_home;
};

class TakeoffAutopilot {
 public:
  TakeoffAutopilot(const TakeoffParams& params, TakeoffServices services)
      : params_(params), services_(std::move(services)) {}

  void wake(const AutopilotInputs& in);
  StepResult step(const AutopilotInputs& in);
  const std::optional<HomeRecord>& home() const { return home_; }

 private:
  enum class Phase { kMotorSpin, kFilterInit, kPersistHome, kAscend, kDone };
  TakeoffParams params_;
  TakeoffServices services_;
  Phase phase_ = Phase::kMotorSpin;
  double phase_start_ = 0.0;
  int init_attempts_ = 0;
  double ground_z_ = 0.0;
  double hold_yaw_ = 0.0;
  Vec2 hold_xy_{0, 0};
  traj::VerticalProfile profile_;
  std::optional<HomeRecord> home_;
};

class MissionAutopilot {
 public:
  MissionAutopilot(const MissionSpec& spec, const traj::TrajectoryLimits& limits)
      : spec_(spec), limits_(limits) {}

  void wake(const AutopilotInputs& in);
  StepResult step(const AutopilotInputs& in);
  bool acquiring() const { return acquiring_; }

 private:
  void plan_from(const Vec3& position, double yaw, double time_s);

  MissionSpec spec_;
  traj::TrajectoryLimits limits_;
  std::optional<traj::PolyTrajectory> trajectory_;
  double start_time_ = 0.0;
  bool acquiring_ = false;
  std::optional<std::string> plan_error_;
};

struct ReturnHomeParams {
  double safe_altitude_m = 4.0;
  double arrival_tolerance_m = 0.3;
};

class ReturnHomeAutopilot {
 public:
  ReturnHomeAutopilot(const ReturnHomeParams& params, const traj::TrajectoryLimits& limits)
      : params_(params), limits_(limits) {}

  void wake(const AutopilotInputs& in, const HomeRecord& home);
  StepResult step(const AutopilotInputs& in);

 private:
  ReturnHomeParams params_;
  traj::TrajectoryLimits limits_;
  std::optional<traj::PolyTrajectory> trajectory_;
  Vec3 target_{0, 0, 0};
  double start_time_ = 0.0;
  bool announced_ = false;
};

struct LandingParams {
  int min_detections = 5;
  double detect_timeout_s = 15.0;
  int max_retries = 3;
  double retry_ascend_m = 1.0;
  double align_yaw_tol_rad = 0.0873;  // 5 deg
  double align_lateral_tol_m = 0.05;
  double descent_speed_ms = 0.4;
  double touchdown_height_m = 0.08;
  double touchdown_vz_ms = 0.1;
  double touchdown_hold_s = 0.3;
  double rls_lambda = 0.95;
  Vec4 measurement_sigma{0.05, 0.05, 0.08, 0.035};
  double covariance_abort_trace = 1.0;
};

class LandingAutopilot {
 public:
  explicit LandingAutopilot(const LandingParams& params) : params_(params) {}

  void wake(const AutopilotInputs& in);
  StepResult step(const AutopilotInputs& in);

  const std::optional<vision::RlsPadEstimate>& pad_estimate() const { return rls_; }
  int phase_index() const { return static_cast<int>(phase_); }

 private:
  enum class Phase { kHoverDetect, kAlign, kDescend, kDone };
  LandingParams params_;
  Phase phase_ = Phase::kHoverDetect;
  double phase_start_ = 0.0;
  Vec3 hold_point_{0, 0, 0};
  double hold_yaw_ = 0.0;
  int retries_ = 0;
  std::vector<Vec4> detect_window_;
  std::optional<vision::RlsPadEstimate> rls_;
  traj::VerticalProfile descent_;
  double descend_start_ = 0.0;
  double low_vz_since_ = -1.0;
};

struct EmergencyParams {
  double descent_speed_ms = 0.5;
  double touchdown_vz_ms = 0.05;
  double touchdown_hold_s = 0.5;
};

class EmergencyLandingAutopilot {
 public:
  explicit EmergencyLandingAutopilot(const EmergencyParams& params) : params_(params) {}

  void wake(const AutopilotInputs& in);
  StepResult step(const AutopilotInputs& in);

 private:
  EmergencyParams params_;
  Vec2 hold_xy_{0, 0};
  double hold_yaw_ = 0.0;
  double start_time_ = 0.0;
  double start_z_ = 0.0;
  traj::VerticalProfile descent_;
  double low_vz_since_ = -1.0;
  bool done_ = false;
};

struct BatteryThresholds {
  double low_voltage = 10.8;
  double critical_voltage = 10.2;
  double full_charge = 0.999;
};

struct TransitionLogRow {
  double time_s = 0.0;
  MasterState state = MasterState::kIdle;
  EventType event = EventType::kBatteryFull;
  MasterState next = MasterState::kIdle;
  bool handled = false;
};

struct EngineConfig {
  MasterState initial_state = MasterState::kCharging;
  BatteryThresholds battery;
  TakeoffParams takeoff;
  ReturnHomeParams return_home;
  LandingParams landing;
  EmergencyParams emergency;
  MissionSpec mission;
  traj::TrajectoryLimits limits;
};

// Hierarchical mission logic: master FSM plus one active autopilot, stepped in
// fixed order once per guidance tick. Battery threshold events are generated
// internally (edge-triggered); external events come from the injection script.
class AutonomyEngine {
 public:
  AutonomyEngine(const EngineConfig& config, TakeoffServices takeoff_services);

  StepResult step(const AutopilotInputs& in, const std::vector<AutonomyEvent>& injected);

  // Seeds the home record for worlds that begin mid-flight.
  void preset_home(const HomeRecord& home) { home_ = home; }

  MasterState state() const { return state_; }
  AutopilotId active() const { return active_; }
  const std::vector<TransitionLogRow>& transition_log() const { return log_; }
  const std::optional<HomeRecord>& home() const { return home_; }
  const std::optional<vision::RlsPadEstimate>& pad_estimate() const {
    return landing_.pad_estimate();
  }
  const std::optional<std::string>& fault_cause() const { return fault_cause_; }
  // Sortie counter: completed landing->charging cycles.
  int completed_sorties() const { return sorties_; }

 private:
  void apply_event(const AutonomyEvent& ev, const AutopilotInputs& in);
  void enter_state(MasterState next, const AutopilotInputs& in);

  EngineConfig config_;
  MasterState state_;
  AutopilotId active_ = AutopilotId::kNone;
  TakeoffAutopilot takeoff_;
  MissionAutopilot mission_;
  ReturnHomeAutopilot return_home_;
  LandingAutopilot landing_;
  EmergencyLandingAutopilot emergency_;
  std::optional<HomeRecord> home_;
  std::deque<AutonomyEvent> pending_;
  std::vector<TransitionLogRow> log_;
  std::optional<std::string> fault_cause_;
  bool started_ = false;
  bool battery_low_latched_ = false;
  bool battery_critical_latched_ = false;
  int sorties_ = 0;
};

}  // namespace sortie::autonomy
