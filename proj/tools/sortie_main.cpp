// Copyright 2026 The Sortie Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "sortie/harness.hpp"

namespace {

sortie::scenario::ScenarioConfig make_config(const std::string& path) {
  return path.empty() ? sortie::scenario::default_config() : sortie::scenario::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sortie: deterministic multirotor autonomy simulation"};
  app.require_subcommand(1);

  std::string config_path, events_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double duration = 0.0;
  int runs = 200;
  int trials = 400;
  bool calibrate = false;
  double hours = 4.0;
  double accel = 0.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "scenario YAML (defaults used when omitted)");
    cmd->add_option("--out", out_dir, "output directory for CSV logs and reports");
    cmd->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one scenario");
  add_common(run_cmd);
  run_cmd->add_option("--events", events_path, "event-injection script (time, event per line)");
  run_cmd->add_option("--duration", duration, "override duration_s");

  CLI::App* mc_cmd = app.add_subcommand("mc-landing", "Monte-Carlo precision landing");
  add_common(mc_cmd);
  mc_cmd->add_option("--runs", runs, "number of landing runs")->check(CLI::PositiveNumber);

  CLI::App* tag_cmd = app.add_subcommand("tag-error", "tag distance-error characterization");
  add_common(tag_cmd);
  tag_cmd->add_option("--trials", trials, "trials per (size, height) cell");
  tag_cmd->add_flag("--calibrate", calibrate,
                    "calibrate pixel noise to the 48 cm @ 4 m height-error target first");

  CLI::App* end_cmd = app.add_subcommand("endurance", "long-duration sortie cycling");
  add_common(end_cmd);
  end_cmd->add_option("--hours", hours, "simulated hours");
  end_cmd->add_option("--accel", accel, "wall-clock pacing factor (0 = free run)");

  CLI11_PARSE(app, argc, argv);

  try {
    sortie::scenario::ScenarioConfig cfg = make_config(config_path);
    if (seed_set) cfg.seed = seed;

    if (run_cmd->parsed()) {
      if (duration > 0.0) cfg.duration_s = duration;
      sortie::scenario::EventScript script;
      if (!events_path.empty()) {
        script = sortie::scenario::load_event_script(events_path);
      }
      const auto summary = sortie::scenario::run_scenario(cfg, script, out_dir);
      std::printf("duration_s %.3f\nsorties %d\nrms_position_error %.4f\nfault %d\n",
                  summary.duration_s, summary.sorties, summary.rms_position_error,
                  summary.fault ? 1 : 0);
      if (summary.fault) {
        std::fprintf(stderr, "FAULT: %s\n", summary.fault_cause.c_str());
        return 2;
      }
    } else if (mc_cmd->parsed()) {
      const auto stats = sortie::scenario::run_monte_carlo_landing(cfg, runs, out_dir);
      std::printf("runs %d\nfaults %d\nhalf_axis_major_2sigma %.4f\nhalf_axis_minor_2sigma "
                  "%.4f\nfraction_within_pad %.4f\n",
                  stats.runs, stats.faults, stats.half_axis_major, stats.half_axis_minor,
                  stats.fraction_within_pad);
    } else if (tag_cmd->parsed()) {
      if (calibrate) {
        const double sigma = sortie::scenario::calibrate_pixel_noise(cfg, 0.045, trials);
        std::printf("calibrated_pixel_noise_sigma %.4f\n", sigma);
        cfg.sensors.visibility.pixel_noise_sigma = sigma;
      }
      const std::vector<double> heights{1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0};
      const std::vector<double> sizes{0.10, 0.15, 0.20, 0.48, 0.60};
      const auto table =
          sortie::scenario::characterize_tag_error(cfg, heights, sizes, trials, out_dir);
      for (const auto& c : table) {
        std::printf("size %.2f height %.2f detected %d sigma2 %.4f\n", c.tag_size_m, c.height_m,
                    c.detected, c.sigma2_height_m);
      }
      sortie::scenario::bundle_descent_profile(cfg, 4.5, 0.2, 0.4, out_dir);
    } else if (end_cmd->parsed()) {
      cfg.time_accel = accel;
      if (cfg.log_rate_hz > 2.0) cfg.log_rate_hz = 2.0;  // keep endurance logs tractable
      const auto stats = sortie::scenario::run_endurance(cfg, hours, out_dir);
      std::printf("sorties %d\nmin_battery_voltage %.3f\nfsm_sequence_ok %d\nsawtooth_ok %d\n"
                  "fault %d\n",
                  stats.sorties, stats.min_battery_voltage, stats.fsm_sequence_ok ? 1 : 0,
                  stats.sawtooth_ok ? 1 : 0, stats.summary.fault ? 1 : 0);
      if (stats.summary.fault) {
        std::fprintf(stderr, "FAULT: %s\n", stats.summary.fault_cause.c_str());
        return 2;
      }
    }
  } catch (const sortie::scenario::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
