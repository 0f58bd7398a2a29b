#include "lsmr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "lsmr/telemetry.hpp"

namespace lsmr {

StepMetrics step_metrics(const std::vector<double>& t, const std::vector<double>& y, double ref, double y0,
                         double band) {
  StepMetrics m;
  const std::size_t n = std::min(t.size(), y.size());
  if (n < 5 || ref == y0) return m;
  const double dir = ref > y0 ? 1.0 : -1.0;
  const double t0 = t.front();

  std::size_t peak = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (dir * y[i] > dir * y[peak]) peak = i;
  }
  const double over = dir * (y[peak] - ref);
  m.max_overshoot = std::max(over, 0.0);
  if (over > 0.0) m.peak_time = t[peak] - t0;

  const double tol = band * std::abs(ref - y0);
  std::size_t last_out = n;  // index of the last sample outside the band
  for (std::size_t i = n; i-- > 0;) {
    if (std::abs(y[i] - ref) > tol) {
      last_out = i;
      break;
    }
  }
  if (last_out == n) {
    m.settling_time = 0.0;
  } else if (last_out + 1 < n) {
    m.settling_time = t[last_out + 1] - t0;
  }

  const std::size_t tail = std::max<std::size_t>(n / 5, 1);
  double acc = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) acc += std::abs(y[i] - ref);
  m.steady_state_error = acc / static_cast<double>(tail);
  return m;
}

PoseErrorStats pose_error_stats(const std::vector<double>& t, const std::vector<double>& x,
                                const std::vector<double>& y, const std::vector<double>& x_ref,
                                const std::vector<double>& y_ref, double delta) {
  PoseErrorStats s;
  const std::size_t n = t.size();
  if (n == 0 || x.size() != n || y.size() != n || x_ref.size() != n || y_ref.size() != n) return s;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::hypot(x[i] - x_ref[i], y[i] - y_ref[i]);
    sum += e;
    sq += e * e;
  }
  s.ape_mean = sum / static_cast<double>(n);
  s.ape_rms = std::sqrt(sq / static_cast<double>(n));

  // Pair each sample with the first one at least delta later.
  double rsum = 0.0, rsq = 0.0;
  std::size_t count = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    j = std::max(j, i);
    while (j < n && t[j] - t[i] < delta - 1e-9) ++j;
    if (j >= n) break;
    const double dx = (x[j] - x[i]) - (x_ref[j] - x_ref[i]);
    const double dy = (y[j] - y[i]) - (y_ref[j] - y_ref[i]);
    const double e = std::hypot(dx, dy);
    rsum += e;
    rsq += e * e;
    ++count;
  }
  if (count > 0) {
    s.rpe_mean = rsum / static_cast<double>(count);
    s.rpe_rms = std::sqrt(rsq / static_cast<double>(count));
  }
  return s;
}

EnvelopeFit fit_envelope(const std::vector<double>& t, const std::vector<double>& v) {
  EnvelopeFit fit;
  const std::size_t n = std::min(t.size(), v.size());
  if (n < 3 || !(v.front() > 0.0)) return fit;
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(v[i] > 0.0)) continue;
    const double l = std::log(v[i]);
    st += t[i];
    sl += l;
    stt += t[i] * t[i];
    stl += t[i] * l;
    ++m;
  }
  const double denom = static_cast<double>(m) * stt - st * st;
  if (m < 3 || denom <= 0.0) return fit;
  fit.mu = -(static_cast<double>(m) * stl - st * sl) / denom;
  if (!(fit.mu > 0.0)) return fit;
  double excess = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    excess = std::max(excess, v[i] - v.front() * std::exp(-fit.mu * (t[i] - t.front())));
  }
  fit.ell = fit.mu * excess;
  fit.valid = true;
  return fit;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json step_json(const StepMetrics& m) {
  return {{"peak_time", opt(m.peak_time)},
          {"max_overshoot", opt(m.max_overshoot)},
          {"settling_time", opt(m.settling_time)},
          {"steady_state_error", opt(m.steady_state_error)}};
}

nlohmann::json lowlevel_metrics(const Channel& ll, double bound) {
  nlohmann::json out;
  const auto E = ll.column("E");
  const auto state = ll.column("state");
  const auto t = ll.column("t");
  double max_e = 0.0;
  std::optional<double> trip;
  for (std::size_t i = 0; i < E.size(); ++i) {
    max_e = std::max(max_e, E[i]);
    if (!trip && E[i] >= bound) trip = t[i];
  }
  out["max_E_held"] = max_e;
  out["first_E_at_bound"] = opt(trip);
  out["final_state"] = state.empty() ? nlohmann::json(nullptr) : nlohmann::json(static_cast<int>(state.back()));
  std::optional<double> stop;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 2.0) {
      stop = t[i];
      break;
    }
  }
  out["safe_stop_time"] = opt(stop);
  return out;
}

}  // namespace

nlohmann::json compute_metrics(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const Channel ll = read_channel((fs::path(run_dir) / "lowlevel.csv").string());
  const nlohmann::json& run = ll.header.at("run");
  const std::string kind = run.at("kind").get<std::string>();
  const double bound = run.at("bound").get<double>();
  nlohmann::json m;
  m["kind"] = kind;
  m["lowlevel"] = lowlevel_metrics(ll, bound);

  if (kind == "scenario") {
    const Channel pose = read_channel((fs::path(run_dir) / "pose.csv").string());
    const auto t = pose.column("t");
    const auto stats = pose_error_stats(t, pose.column("x_true"), pose.column("y_true"), pose.column("x_ref"),
                                        pose.column("y_ref"));
    m["ape_mean"] = opt(stats.ape_mean);
    m["ape_rms"] = opt(stats.ape_rms);
    m["rpe_mean"] = opt(stats.rpe_mean);
    m["rpe_rms"] = opt(stats.rpe_rms);
    const auto E = pose.column("E");
    const auto wz = pose.column("wz_ref");
    double wz_max = 0.0;
    for (double w : wz) wz_max = std::max(wz_max, std::abs(w));
    std::optional<double> max_e, max_sharp;
    for (std::size_t i = 0; i < E.size(); ++i) {
      max_e = std::max(max_e.value_or(E[i]), E[i]);
      if (wz_max > 0.0 && std::abs(wz[i]) >= 0.5 * wz_max) max_sharp = std::max(max_sharp.value_or(E[i]), E[i]);
    }
    m["max_E"] = opt(max_e);
    m["max_E_sharp_turns"] = opt(max_sharp);
    m["pose_samples"] = E.size();
    m["step"] = nullptr;
  } else {
    const double ref = run.at("step_reference").get<double>();
    const double r = run.at("wheel_radius").get<double>();
    const auto t = ll.column("t");
    nlohmann::json step;
    for (const char* side : {"R", "L"}) {
      // Wheel-rate tracking expressed as wheel surface speed (m/s).
      std::vector<double> v = ll.column(std::string("msr_") + side);
      for (double& x : v) x *= r;
      step[side] = step_json(step_metrics(t, v, r * ref, 0.0));
    }
    m["step"] = step;
    m["ape_mean"] = nullptr;
    m["ape_rms"] = nullptr;
    m["rpe_mean"] = nullptr;
    m["rpe_rms"] = nullptr;
  }
  return m;
}

std::string metrics_text(const nlohmann::json& metrics) { return metrics.dump(2) + "\n"; }

}  // namespace lsmr
