#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace lsmr {

struct ReplayCheck {
  std::string name;
  bool pass = true;
  std::string detail;  // first offending row (file:line) or a short summary
};

struct ReplayReport {
  std::string dir;
  std::string kind;
  std::vector<ReplayCheck> checks;
  nlohmann::json metrics;  // recomputed from the telemetry

  bool ok() const;
  std::string text() const;
};

/// Re-reads a run directory and verifies rate fidelity, causality, the barrier invariant, the SafeStop latch,
/// monotone braking and that metrics.json is byte-identical to a fresh recomputation.
/// Malformed files raise TelemetryError carrying the file and line number.
ReplayReport replay(const std::string& run_dir);

}  // namespace lsmr
