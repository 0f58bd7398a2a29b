#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace lsmr {

/// Step-response figures for a response y(t) to a constant reference applied at t[0].
/// Anything that cannot be established from the data is left empty.
struct StepMetrics {
  std::optional<double> peak_time;           // first time of the maximum, only when the response overshoots
  std::optional<double> max_overshoot;       // max(y) - ref in the step direction, >= 0
  std::optional<double> settling_time;       // entry into the band for good
  std::optional<double> steady_state_error;  // mean |y - ref| over the final 20%
};

StepMetrics step_metrics(const std::vector<double>& t, const std::vector<double>& y, double ref, double y0,
                         double band = 0.02);

struct PoseErrorStats {
  std::optional<double> ape_mean;
  std::optional<double> ape_rms;
  std::optional<double> rpe_mean;
  std::optional<double> rpe_rms;
};

/// APE from per-sample position errors, RPE from displacement differences over `delta` seconds.
PoseErrorStats pose_error_stats(const std::vector<double>& t, const std::vector<double>& x,
                                const std::vector<double>& y, const std::vector<double>& x_ref,
                                const std::vector<double>& y_ref, double delta = 1.0);

/// V(t) <= V(0) exp(-mu t) + ell / mu with mu from a log-linear least-squares fit and the smallest such ell.
struct EnvelopeFit {
  double mu = 0.0;
  double ell = 0.0;
  bool valid = false;
};

EnvelopeFit fit_envelope(const std::vector<double>& t, const std::vector<double>& v);

/// Metrics of a run directory, computed from its telemetry files only.
nlohmann::json compute_metrics(const std::string& run_dir);
/// Canonical serialization used for metrics.json.
std::string metrics_text(const nlohmann::json& metrics);

}  // namespace lsmr
