#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lsmr/config.hpp"
#include "lsmr/metrics.hpp"
#include "lsmr/replay.hpp"
#include "lsmr/scenario.hpp"
#include "lsmr/telemetry.hpp"

using namespace lsmr;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lsmr_test_runtime_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Linear surrogate close to the default plant's inverse; enough for short closed-loop runs.
SdnnModel linear_model() {
  SdnnModel m;
  m.right.net = MlpParams::zeros({});
  m.right.net.layers[0].weights(0, 0) = 1.0;
  m.right.input_norm = {-1.0, 1.0};
  m.right.output_norm = {-1.0, 1.0};
  m.left = m.right;
  return m;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream os(p);
  for (const auto& l : lines) os << l << '\n';
}

}  // namespace

TEST_CASE("config: canonical text round trips") {
  RunConfig cfg;
  cfg.scenario = Scenario::SdnnOnly;
  cfg.terrain = TerrainKind::SoftSoil;
  cfg.seed = 42;
  cfg.plant.left.inertia = 0.123;
  cfg.ocp.r_bar = Eigen::Vector2d(0.3, 0.1);
  cfg.sdnn.train.hidden = {7, 3};
  const std::string text = to_text(cfg);
  const RunConfig back = parse_config(text);
  CHECK(to_text(back) == text);
  CHECK(back.seed == 42);
  CHECK(back.plant.left.inertia == 0.123);
  CHECK(back.sdnn.train.hidden == std::vector<int>{7, 3});
  CHECK(fingerprint(text) == fingerprint(to_text(back)));
  CHECK(fingerprint(text) != fingerprint(to_text(RunConfig{})));
}

TEST_CASE("config: partial files override defaults, comments are ignored") {
  const RunConfig cfg = parse_config("# header\n[run]\nseed = 9   # trailing\n\n[nmpc]\nhorizon = 12\nq_x = 1, 2, 3\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.ocp.horizon == 12);
  CHECK(cfg.ocp.q_x[2] == 3.0);
  CHECK(cfg.rates.low_level_hz == 1000);
}

TEST_CASE("config: errors name the offending line") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("[run]\nseed = 1\nbogus = 2\n").find("line 3") != std::string::npos);
  CHECK(message("[nosuch]\n").find("line 1") != std::string::npos);
  CHECK(message("[run]\nseed = abc\n").find("line 2") != std::string::npos);
  CHECK(message("[nmpc]\nq_x = 1, 2\n").find("line 2") != std::string::npos);
  CHECK(message("seed = 1\n").find("line 1") != std::string::npos);
  CHECK_THROWS_AS(parse_config("[rates]\npose = 30\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nscenario = fast\n"), ConfigError);
}

TEST_CASE("telemetry: write, read back, strict parsing") {
  const fs::path dir = scratch("telemetry");
  const std::string path = (dir / "c.csv").string();
  {
    ChannelWriter w(path, "demo", 10.0, {"a", "b"}, {{"kind", "test"}});
    w.row(0.0, {1.5, -0.0});
    w.row(0.1, {1.0 / 3.0, -2e-12});
    w.close();
    CHECK(w.rows() == 2);
  }
  const Channel ch = read_channel(path);
  CHECK(ch.header.at("channel") == "demo");
  CHECK(ch.header.at("run").at("kind") == "test");
  REQUIRE(ch.rows.size() == 2);
  CHECK(ch.column("a")[1] == Approx(1.0 / 3.0).epsilon(1e-8));
  CHECK(ch.line_numbers[0] == 3);
  // Negative zero is written as plain zero.
  CHECK(read_lines(path)[2] == "0.000,1.5,0");

  auto lines = read_lines(path);
  lines.push_back("0.200,1,x");
  write_lines(path, lines);
  try {
    read_channel(path);
    FAIL("expected a parse error");
  } catch (const TelemetryError& e) {
    CHECK(std::string(e.what()).find(":5:") != std::string::npos);
  }
  lines.back() = "0.200,1";
  write_lines(path, lines);
  CHECK_THROWS_AS(read_channel(path), TelemetryError);
  CHECK_THROWS_AS(read_channel((dir / "missing.csv").string()), TelemetryError);
}

TEST_CASE("step metrics: perfect tracking has no overshoot and no error") {
  std::vector<double> t, y;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.01 * i);
    y.push_back(0.7);
  }
  const StepMetrics m = step_metrics(t, y, 0.7, 0.0);
  CHECK(*m.max_overshoot == 0.0);
  CHECK(*m.steady_state_error == 0.0);
  CHECK(*m.settling_time == 0.0);
  CHECK_FALSE(m.peak_time.has_value());
}

TEST_CASE("step metrics: first-order response settles at tau ln 50") {
  // y = 1 - exp(-t/tau) leaves the 2% band for good at tau ln 50 (the familiar "4 tau" is the e^-4 band).
  const double tau = 1.0, dt = 0.01;
  std::vector<double> t, y;
  for (int i = 0; i <= 1000; ++i) {
    t.push_back(dt * i);
    y.push_back(1.0 - std::exp(-t.back() / tau));
  }
  const StepMetrics m = step_metrics(t, y, 1.0, 0.0);
  CHECK(std::abs(*m.settling_time - tau * std::log(50.0)) <= dt);
  CHECK(*m.max_overshoot == 0.0);
  const StepMetrics m4 = step_metrics(t, y, 1.0, 0.0, std::exp(-4.0));
  CHECK(std::abs(*m4.settling_time - 4.0 * tau) <= dt);
}

TEST_CASE("step metrics: overshoot, peak time, absent figures") {
  std::vector<double> t, y;
  const double wn = 4.0, zeta = 0.3, wd = wn * std::sqrt(1 - zeta * zeta);
  for (int i = 0; i <= 2000; ++i) {
    t.push_back(0.005 * i);
    const double s = t.back();
    y.push_back(1.0 - std::exp(-zeta * wn * s) * (std::cos(wd * s) + zeta / std::sqrt(1 - zeta * zeta) * std::sin(wd * s)));
  }
  const StepMetrics m = step_metrics(t, y, 1.0, 0.0);
  CHECK(*m.max_overshoot == Approx(std::exp(-zeta * M_PI / std::sqrt(1 - zeta * zeta))).epsilon(1e-3));
  CHECK(std::abs(*m.peak_time - M_PI / wd) <= 0.005);

  // Never settles: the last sample is out of band, so there is no settling time.
  std::vector<double> ramp_t{0, 1, 2, 3, 4, 5}, ramp_y{0, 0.1, 0.2, 0.3, 0.4, 0.5};
  const StepMetrics none = step_metrics(ramp_t, ramp_y, 1.0, 0.0);
  CHECK_FALSE(none.settling_time.has_value());
  CHECK_FALSE(none.peak_time.has_value());
  // Too few samples: everything absent.
  const StepMetrics empty = step_metrics({0, 1}, {0, 1}, 1.0, 0.0);
  CHECK_FALSE(empty.max_overshoot.has_value());
  CHECK_FALSE(empty.steady_state_error.has_value());
}

TEST_CASE("pose error stats and envelope fit") {
  std::vector<double> t, x, y, xr, yr;
  for (int i = 0; i <= 200; ++i) {
    t.push_back(0.05 * i);
    xr.push_back(0.3 * t.back());
    yr.push_back(std::sin(t.back()));
    x.push_back(xr.back() + 0.03);
    y.push_back(yr.back() - 0.04);
  }
  const PoseErrorStats s = pose_error_stats(t, x, y, xr, yr);
  CHECK(*s.ape_mean == Approx(0.05));
  CHECK(*s.ape_rms == Approx(0.05));
  CHECK(*s.rpe_mean == Approx(0.0));
  CHECK_FALSE(pose_error_stats({}, {}, {}, {}, {}).ape_mean.has_value());

  std::vector<double> v;
  for (double ti : t) v.push_back(2.0 * std::exp(-1.5 * ti));
  const EnvelopeFit f = fit_envelope(t, v);
  CHECK(f.valid);
  CHECK(f.mu == Approx(1.5).epsilon(1e-9));
  CHECK(f.ell == Approx(0.0).epsilon(1e-9));
}

TEST_CASE("scenario runs are deterministic and pass replay") {
  RunConfig cfg;
  cfg.scenario = Scenario::FullRsdnn;
  cfg.terrain = TerrainKind::SoftSoil;
  cfg.duration = 1.5;
  cfg.seed = 5;
  const SdnnModel model = linear_model();
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const RunResult ra = run_scenario(cfg, model, a.string());
  run_scenario(cfg, model, b.string());
  CHECK(ra.exit_code == kExitCompleted);
  for (const char* f : {"lowlevel.csv", "pose.csv", "nmpc.csv", "safety.csv", "metrics.json", "summary.json",
                        "config.txt"}) {
    CAPTURE(f);
    CHECK(read_text_file((a / f).string()) == read_text_file((b / f).string()));
  }
  const ReplayReport rep = replay(a.string());
  CAPTURE(rep.text());
  CHECK(rep.ok());
  CHECK(rep.checks.size() >= 8);
  CHECK(read_lines(a / "lowlevel.csv").size() == 1500 + 2);
  CHECK(read_lines(a / "pose.csv").size() == 30 + 2);
  CHECK(read_lines(a / "nmpc.csv").size() == 75 + 2);
}

TEST_CASE("replay flags tampered telemetry") {
  RunConfig cfg;
  cfg.scenario = Scenario::FullRsdnn;
  cfg.duration = 0.5;
  const SdnnModel model = linear_model();
  const fs::path dir = scratch("tamper");
  run_scenario(cfg, model, dir.string());
  REQUIRE(replay(dir.string()).ok());

  auto failed = [](const ReplayReport& r, const std::string& name) {
    for (const auto& c : r.checks) {
      if (c.name == name) return !c.pass;
    }
    return false;
  };

  const auto original = read_lines(dir / "lowlevel.csv");
  const auto cols = read_channel((dir / "lowlevel.csv").string()).columns;
  const auto idx = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
  };
  auto edit = [&](std::size_t line, const std::string& column, const std::string& value) {
    auto lines = original;
    std::vector<std::string> fields;
    std::stringstream ss(lines[line]);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    fields[idx(column)] = value;
    std::string joined;
    for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
    lines[line] = joined;
    write_lines(dir / "lowlevel.csv", lines);
  };

  // A motion command on a tick where E already reached the bound.
  edit(100, "E", "0.45");
  CHECK(failed(replay(dir.string()), "barrier_invariant"));

  // A skipped tick.
  {
    auto lines = original;
    lines.erase(lines.begin() + 200);
    write_lines(dir / "lowlevel.csv", lines);
    CHECK(failed(replay(dir.string()), "rate_fidelity:lowlevel"));
  }

  // A snapshot stamped in the future.
  edit(50, "pose_age", "-0.001");
  CHECK(failed(replay(dir.string()), "causality"));

  // Malformed row: reported with its line number.
  {
    auto lines = original;
    lines[41] = "0.039,garbage";
    write_lines(dir / "lowlevel.csv", lines);
    try {
      replay(dir.string());
      FAIL("expected a telemetry error");
    } catch (const TelemetryError& e) {
      CHECK(std::string(e.what()).find(":42:") != std::string::npos);
    }
  }

  // Stale metrics.json.
  write_lines(dir / "lowlevel.csv", original);
  REQUIRE(replay(dir.string()).ok());
  write_text_file((dir / "metrics.json").string(), "{}\n");
  CHECK(failed(replay(dir.string()), "metrics_identical"));
}
