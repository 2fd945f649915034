// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "sortie/autonomy.hpp"
#include "sortie/geometry.hpp"
#include "sortie/msf_ekf.hpp"

namespace sortie::scenario {

inline constexpr const char* kRunLogSchema = "sortie-runlog-v1";

struct RunLogRow {
  double time_s = 0.0;
  autonomy::MasterState master_state = autonomy::MasterState::kIdle;
  Vec3 p_true{0, 0, 0};
  Vec3 v_true{0, 0, 0};
  double yaw_true = 0.0;
  Vec3 p_est{0, 0, 0};
  Vec3 v_est{0, 0, 0};
  double yaw_est = 0.0;
  double battery_voltage = 0.0;
  double battery_charge = 0.0;
  std::array<double, 4> motor_cmd{0, 0, 0, 0};
  std::string events;  // semicolon-joined event names
};

struct RunLog {
  std::vector<RunLogRow> rows;

  void write_csv(const std::string& path) const;
  static RunLog read_csv(const std::string& path);
};

struct NisLogRow {
  double time_s = 0.0;
  ekf::MeasurementKind kind = ekf::MeasurementKind::kGpsPos;
  double nis = 0.0;
  int dof = 0;
  bool accepted = false;
};

void write_nis_csv(const std::string& path, const std::vector<NisLogRow>& rows);
void write_fsm_csv(const std::string& path, const std::vector<autonomy::TransitionLogRow>& rows);

}  // namespace sortie::scenario
