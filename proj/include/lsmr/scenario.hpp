#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "lsmr/config.hpp"
#include "lsmr/safety.hpp"
#include "lsmr/sdnn_model.hpp"

namespace lsmr {

/// Terrain for the configured kind. Soft soil puts high-slip patches on the four tightest corners of the
/// figure-eight, loading the outer side of each turn.
TerrainProfile make_terrain(const RunConfig& cfg);

/// Exit status convention shared with the CLI.
inline constexpr int kExitCompleted = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitSafeStop = 2;

struct RunResult {
  std::string dir;
  int exit_code = kExitCompleted;
  SafetyState final_state = SafetyState::Running;
  LatchReason reason = LatchReason::None;
  double t_end = 0.0;
  int solves = 0;
  double solve_time_max_s = 0.0;   // wall clock, reported but never logged
  double solve_time_mean_s = 0.0;
  double wall_time_s = 0.0;
  nlohmann::json metrics;
};

/// Closed-loop lemniscate run on a virtual 1 kHz clock. Writes pose/nmpc/lowlevel/safety channels,
/// metrics.json and summary.json into out_dir (created if needed).
RunResult run_scenario(const RunConfig& cfg, const SdnnModel& model, const std::string& out_dir);

enum class LowLevelPolicy { Sdnn, Rsdnn };
std::string_view to_string(LowLevelPolicy p);

/// Actuation-only step test: both wheels commanded to cfg.step.reference from rest under cfg.step.load.
RunResult run_step_test(const RunConfig& cfg, const SdnnModel& model, LowLevelPolicy policy,
                        const std::string& out_dir);

}  // namespace lsmr
