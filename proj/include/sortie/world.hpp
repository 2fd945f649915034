// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sortie/config.hpp"
#include "sortie/flight_control.hpp"
#include "sortie/run_log.hpp"
#include "sortie/world_events.hpp"

namespace sortie::scenario {

struct RunSummary {
  bool fault = false;
  std::string fault_cause;
  double duration_s = 0.0;
  int sorties = 0;
  double min_battery_voltage = 1e9;
  double rms_position_error = 0.0;    // estimate vs truth, full run
  std::vector<Vec2> touchdowns;       // truth, relative to pad center
  bool finished = false;
};

// Deterministic fixed-order scheduler wiring plant, sensors, estimator,
// controller and autonomy at their rates (1 kHz physics base).
class World {
 public:
  explicit World(const ScenarioConfig& cfg);
  ~World();

  // Steps until duration_s of scheduled time has elapsed (pre-roll excluded)
  // or the master FSM faults.
  RunSummary run(double duration_s, const EventScript& script = {});

  // Places the vehicle hovering at a world position with the filter hot-
  // started and the master FSM in RETURN_HOME toward the preset home record.
  void start_airborne_approach(const Vec3& position, double yaw,
                               const autonomy::HomeRecord& home);

  const sim::TrueVehicleState& truth() const;
  const ekf::MsfEkf& estimator() const;
  const autonomy::AutonomyEngine& engine() const;
  const sim::BatteryState& battery() const;
  const ScenarioConfig& config() const;

  RunLog& log();
  const std::vector<NisLogRow>& nis_log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sortie::scenario
