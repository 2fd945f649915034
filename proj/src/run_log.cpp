// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include "sortie/run_log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sortie::scenario {

void RunLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("RunLog::write_csv: cannot open " + path);
  }
  out << "# " << kRunLogSchema << "\n";
  out << "time,master_state,px,py,pz,vx,vy,vz,yaw,est_px,est_py,est_pz,est_vx,est_vy,est_vz,"
         "est_yaw,battery_v,battery_charge,f0,f1,f2,f3,events\n";
  char buf[640];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%.6f,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s\n",
                  r.time_s, autonomy::to_string(r.master_state), r.p_true.x(), r.p_true.y(),
                  r.p_true.z(), r.v_true.x(), r.v_true.y(), r.v_true.z(), r.yaw_true,
                  r.p_est.x(), r.p_est.y(), r.p_est.z(), r.v_est.x(), r.v_est.y(), r.v_est.z(),
                  r.yaw_est, r.battery_voltage, r.battery_charge, r.motor_cmd[0], r.motor_cmd[1],
                  r.motor_cmd[2], r.motor_cmd[3], r.events.c_str());
    out << buf;
  }
}

RunLog RunLog::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("RunLog::read_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != std::string("# ") + kRunLogSchema) {
    throw std::runtime_error("RunLog::read_csv: schema mismatch");
  }
  std::getline(in, line);  // header

  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() < 22) {
      throw std::runtime_error("RunLog::read_csv: short row");
    }
    RunLogRow r;
    r.time_s = std::stod(cells[0]);
    const auto st = autonomy::master_state_from_string(cells[1]);
    if (!st) {
      throw std::runtime_error("RunLog::read_csv: bad state " + cells[1]);
    }
    r.master_state = *st;
    int i = 2;
    for (int a = 0; a < 3; ++a) r.p_true[a] = std::stod(cells[i++]);
    for (int a = 0; a < 3; ++a) r.v_true[a] = std::stod(cells[i++]);
    r.yaw_true = std::stod(cells[i++]);
    for (int a = 0; a < 3; ++a) r.p_est[a] = std::stod(cells[i++]);
    for (int a = 0; a < 3; ++a) r.v_est[a] = std::stod(cells[i++]);
    r.yaw_est = std::stod(cells[i++]);
    r.battery_voltage = std::stod(cells[i++]);
    r.battery_charge = std::stod(cells[i++]);
    for (int a = 0; a < 4; ++a) r.motor_cmd[a] = std::stod(cells[i++]);
    r.events = cells.size() > 22 ? cells[22] : "";
    log.rows.push_back(r);
  }
  return log;
}

void write_nis_csv(const std::string& path, const std::vector<NisLogRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_nis_csv: cannot open " + path);
  }
  out << "time,kind,nis,dof,accepted\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%s,%.9g,%d,%d\n", r.time_s,
                  ekf::measurement_name(r.kind), r.nis, r.dof, r.accepted ? 1 : 0);
    out << buf;
  }
}

void write_fsm_csv(const std::string& path, const std::vector<autonomy::TransitionLogRow>& rows) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_fsm_csv: cannot open " + path);
  }
  out << "time,state,event,new_state,handled\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%s,%s,%s,%d\n", r.time_s, autonomy::to_string(r.state),
                  autonomy::to_string(r.event), autonomy::to_string(r.next), r.handled ? 1 : 0);
    out << buf;
  }
}

}  // namespace sortie::scenario
