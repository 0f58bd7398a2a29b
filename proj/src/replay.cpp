#include "lsmr/replay.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <optional>

#include "lsmr/config.hpp"
#include "lsmr/metrics.hpp"
#include "lsmr/safety.hpp"
#include "lsmr/telemetry.hpp"

namespace lsmr {

bool ReplayReport::ok() const {
  for (const ReplayCheck& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

std::string ReplayReport::text() const {
  std::string out = fmt::format("replay {} ({})\n", dir, kind);
  for (const ReplayCheck& c : checks) {
    out += fmt::format("{} {}: {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
  }
  return out;
}

namespace {

// Collects the first failure of a check; later rows are not reported.
class Check {
 public:
  Check(std::string name, std::string file) : file_(std::move(file)) { result_.name = std::move(name); }

  void require(bool cond, int line, const std::string& what) {
    if (cond || !result_.pass) return;
    result_.pass = false;
    result_.detail = fmt::format("{}:{}: {}", file_, line, what);
  }
  ReplayCheck done(const std::string& summary) {
    if (result_.pass) result_.detail = summary;
    return result_;
  }

 private:
  std::string file_;
  ReplayCheck result_;
};

long long tick_of(double t, double hz) { return std::llround(t * hz); }

// Rows must sit exactly `every` base ticks apart, starting at base tick 0.
ReplayCheck check_spacing(const Channel& ch, const std::string& file, int base_hz, long long every) {
  Check c("rate_fidelity:" + ch.header.value("channel", std::string("?")), file);
  long long prev = -every;
  const std::size_t it = ch.col("t");
  for (std::size_t i = 0; i < ch.rows.size(); ++i) {
    const double t = ch.rows[i][it];
    const long long k = tick_of(t, base_hz);
    c.require(std::abs(t * base_hz - static_cast<double>(k)) < 1e-6, ch.line_numbers[i],
              fmt::format("t={} is off the {} Hz grid", t, base_hz));
    c.require(k - prev == every, ch.line_numbers[i],
              fmt::format("tick gap {} where {} was expected", k - prev, every));
    prev = k;
  }
  return c.done(fmt::format("{} rows, {} base ticks apart", ch.rows.size(), every));
}

bool is_zero(double v) { return v == 0.0; }

}  // namespace

ReplayReport replay(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const auto path = [&](const char* name) { return (fs::path(run_dir) / name).string(); };

  ReplayReport rep;
  rep.dir = run_dir;
  const std::string ll_file = path("lowlevel.csv");
  const Channel ll = read_channel(ll_file);
  const nlohmann::json& run = ll.header.at("run");
  rep.kind = run.at("kind").get<std::string>();
  const RunConfig cfg = parse_config(run.at("config").get<std::string>());
  const int base = cfg.rates.low_level_hz;
  const double bound = run.at("bound").get<double>();

  rep.checks.push_back(check_spacing(ll, ll_file, base, cfg.lowlevel_decimation));

  const std::size_t c_ref[2] = {ll.col("ref_R"), ll.col("ref_L")};
  const std::size_t c_u[2] = {ll.col("u_R"), ll.col("u_L")};
  const std::size_t c_E = ll.col("E");
  const std::size_t c_state = ll.col("state");
  const std::size_t c_pose_age = ll.col("pose_age");
  const std::size_t c_cmd_age = ll.col("cmd_age");

  {
    Check c("finite", ll_file);
    for (std::size_t i = 0; i < ll.rows.size(); ++i) {
      for (double v : ll.rows[i]) c.require(std::isfinite(v), ll.line_numbers[i], "non-finite value");
    }
    rep.checks.push_back(c.done("all values finite"));
  }

  if (rep.kind == "scenario") {
    const double pose_period = 1.0 / cfg.rates.pose_hz;
    {
      Check c("causality", ll_file);
      for (std::size_t i = 0; i < ll.rows.size(); ++i) {
        const auto& r = ll.rows[i];
        c.require(r[c_pose_age] >= 0.0 && r[c_cmd_age] >= 0.0, ll.line_numbers[i], "snapshot from the future");
        c.require(r[c_pose_age] < pose_period - 0.5 / base, ll.line_numbers[i], "pose snapshot older than a period");
      }
      rep.checks.push_back(c.done("snapshot ages within [0, pose period)"));
    }

    {
      // From the first tick with E >= O on, nothing may move.
      Check c("barrier_invariant", ll_file);
      std::optional<double> first;
      for (std::size_t i = 0; i < ll.rows.size(); ++i) {
        const auto& r = ll.rows[i];
        if (!first && r[c_E] >= bound) first = r[0];
        if (!first) continue;
        c.require(is_zero(r[c_ref[0]]) && is_zero(r[c_ref[1]]) && is_zero(r[c_u[0]]) && is_zero(r[c_u[1]]),
                  ll.line_numbers[i], fmt::format("motion command at t={} after E >= O at t={}", r[0], *first));
        c.require(r[c_state] == static_cast<double>(SafetyState::SafeStop), ll.line_numbers[i],
                  "not in SafeStop after E >= O");
      }
      rep.checks.push_back(c.done(first ? fmt::format("E >= O first at t={:.3f}; no motion afterwards", *first)
                                        : std::string("E < O throughout")));
    }

    {
      Check latch("safestop_latch", ll_file);
      Check brake("monotone_braking", ll_file);
      bool latched = false;
      for (std::size_t i = 0; i < ll.rows.size(); ++i) {
        const auto& r = ll.rows[i];
        const auto state = static_cast<SafetyState>(static_cast<int>(r[c_state]));
        if (latched) latch.require(state == SafetyState::SafeStop, ll.line_numbers[i], "left SafeStop without reset");
        latched = latched || state == SafetyState::SafeStop;
        if (i > 0 && state == SafetyState::Braking &&
            static_cast<SafetyState>(static_cast<int>(ll.rows[i - 1][c_state])) == SafetyState::Braking) {
          for (int s = 0; s < 2; ++s) {
            brake.require(std::abs(r[c_ref[s]]) <= std::abs(ll.rows[i - 1][c_ref[s]]), ll.line_numbers[i],
                          "braking command increased");
          }
        }
      }
      rep.checks.push_back(latch.done(latched ? "SafeStop held to the end" : "never latched"));
      rep.checks.push_back(brake.done("|command| non-increasing while braking"));
    }

    const std::string pose_file = path("pose.csv");
    const Channel pose = read_channel(pose_file);
    rep.checks.push_back(check_spacing(pose, pose_file, base, cfg.rates.pose_every()));

    const std::string nmpc_file = path("nmpc.csv");
    const Channel nmpc = read_channel(nmpc_file);
    if (cfg.scenario == Scenario::NoNmpc) {
      Check c("rate_fidelity:nmpc", nmpc_file);
      c.require(nmpc.rows.empty(), nmpc.rows.empty() ? 0 : nmpc.line_numbers[0], "solve logged without NMPC");
      rep.checks.push_back(c.done("no solves (open loop)"));
    } else {
      rep.checks.push_back(check_spacing(nmpc, nmpc_file, base, cfg.rates.high_level_every()));
    }

    const std::string safety_file = path("safety.csv");
    const Channel safety = read_channel(safety_file);
    {
      Check c("safety_channel", safety_file);
      c.require(safety.rows.size() == ll.rows.size(), 1, "row count differs from the low-level channel");
      const std::size_t s_state = safety.col("state");
      const std::size_t s_E = safety.col("E");
      const std::size_t s_O = safety.col("O");
      for (std::size_t i = 0; i < std::min(safety.rows.size(), ll.rows.size()); ++i) {
        const auto& r = safety.rows[i];
        c.require(r[0] == ll.rows[i][0] && r[s_state] == ll.rows[i][c_state] && r[s_E] == ll.rows[i][c_E],
                  safety.line_numbers[i], "disagrees with the low-level channel");
        c.require(r[s_O] == bound, safety.line_numbers[i], "bound differs from the run header");
      }
      rep.checks.push_back(c.done("matches the low-level channel tick for tick"));
    }
  }

  rep.metrics = compute_metrics(run_dir);
  {
    ReplayCheck c{"metrics_identical", true, "metrics.json reproduced byte for byte"};
    const std::string fresh = metrics_text(rep.metrics);
    std::string stored;
    try {
      stored = read_text_file(path("metrics.json"));
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = e.what();
    }
    if (c.pass && stored != fresh) {
      c.pass = false;
      c.detail = "metrics.json differs from the recomputation";
    }
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace lsmr
