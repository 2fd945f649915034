// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace sortie::scenario {

// One scripted line: autonomy event names (ForceTakeoff, ForceLand,
// ReturnToHome, EmergencyLand, ...) are routed to the master FSM; the
// scheduler-level pseudo events CameraOcclusionOn/CameraOcclusionOff toggle
// the vision stream.
struct ScriptedEvent {
  double time_s = 0.0;
  std::string name;
};

using EventScript = std::vector<ScriptedEvent>;

// Text format: "<time_s> <EventName>" per line; '#' comments.
EventScript load_event_script(const std::string& path);

}  // namespace sortie::scenario
