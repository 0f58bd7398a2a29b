#include "lsmr/scenario.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>

#include "lsmr/lowlevel.hpp"
#include "lsmr/metrics.hpp"
#include "lsmr/nmpc.hpp"
#include "lsmr/reference.hpp"
#include "lsmr/telemetry.hpp"

namespace lsmr {

namespace {

// Pose of the tightest turn in the first quarter period; the other three follow by symmetry.
Pose2 tightest_turn(const LemniscateParams& p) {
  Pose2 best;
  double best_wz = -1.0;
  for (int i = 1; i < 2000; ++i) {
    const RefSample s = lemniscate_reference(p, 0.25 * p.period * i / 2000.0);
    if (std::abs(s.rate[2]) > best_wz) {
      best_wz = std::abs(s.rate[2]);
      best = s.pose;
    }
  }
  return best;
}

}  // namespace

TerrainProfile make_terrain(const RunConfig& cfg) {
  const TerrainOverrides& o = cfg.terrain_overrides;
  auto pick = [](double override_value, double preset) { return override_value >= 0.0 ? override_value : preset; };
  const bool soft = cfg.terrain == TerrainKind::SoftSoil;
  TerrainProfile t;
  t.kind = cfg.terrain;
  t.seed = cfg.seed;
  t.base_slip_right = t.base_slip_left = pick(o.base_slip, soft ? 0.03 : 0.0);
  t.texture_amplitude = pick(o.texture, soft ? 0.05 : 0.002);
  t.turn_resistance = pick(o.turn_resistance, soft ? 0.01 : 0.0);
  // Asphalt has no soft patches; the patch keys only shape the soft-soil field.
  const double patch = soft ? pick(o.patch_slip, 0.3) : 0.0;
  if (patch > 0.0) {
    const double r = pick(o.patch_radius, 2.0);
    const Pose2 c = tightest_turn(cfg.reference);
    const double cx = cfg.reference.center_x;
    const double cy = cfg.reference.center_y;
    // The eastern lobe is driven clockwise (left side outside), the western one counter-clockwise.
    for (double y : {c.y, 2.0 * cy - c.y}) {
      t.patches.push_back({c.x, y, r, patch / 3.0, patch});
      t.patches.push_back({2.0 * cx - c.x, y, r, patch, patch / 3.0});
    }
  }
  return t;
}

std::string_view to_string(LowLevelPolicy p) { return p == LowLevelPolicy::Sdnn ? "sdnn" : "rsdnn"; }

namespace {

// e = msr - ref; barrier is 0 on ticks where it was not evaluated.
const std::vector<std::string> kLowLevelColumns{
    "ref_R",   "ref_L", "msr_R", "msr_L", "e_R", "e_L", "true_R",  "true_L",  "usdnn_R", "usdnn_L",
    "u_R",     "u_L",   "chi_R", "chi_L", "E",   "barrier", "state", "pose_age", "cmd_age"};

nlohmann::json provenance(const RunConfig& cfg, const SdnnModel& model, const std::string& kind) {
  return {{"kind", kind},
          {"scenario", std::string(to_string(cfg.scenario))},
          {"terrain", std::string(to_string(cfg.terrain))},
          {"seed", cfg.seed},
          {"bound", cfg.safety.bound},
          {"wheel_radius", cfg.plant.geometry.wheel_radius},
          {"model_fingerprint", model.fingerprint},
          {"config", to_text(cfg)}};
}

double tick_time(long long k, int hz) { return static_cast<double>(k) / hz; }

void finish(RunResult& res, const std::string& dir, const nlohmann::json& summary_extra) {
  namespace fs = std::filesystem;
  res.metrics = compute_metrics(dir);
  write_text_file((fs::path(dir) / "metrics.json").string(), metrics_text(res.metrics));
  nlohmann::json summary = summary_extra;
  summary["exit_code"] = res.exit_code;
  summary["final_state"] = std::string(to_string(res.final_state));
  summary["latch_reason"] = std::string(to_string(res.reason));
  summary["t_end"] = res.t_end;
  write_text_file((fs::path(dir) / "summary.json").string(), summary.dump(2) + "\n");
}

}  // namespace

RunResult run_scenario(const RunConfig& cfg_in, const SdnnModel& model, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto wall_start = std::chrono::steady_clock::now();
  RunConfig cfg = cfg_in;
  cfg.ocp.geometry = cfg.plant.geometry;
  cfg.validate();
  fs::create_directories(out_dir);

  const RateSchedule& rates = cfg.rates;
  const double dt = rates.dt();
  const RobotGeometry& geom = cfg.plant.geometry;
  RobotPlant robot(cfg.plant, make_terrain(cfg), cfg.disturbance.profile(cfg.seed));
  SensorConfig sc = cfg.sensors;
  sc.pose_rate = rates.pose_hz;
  sc.wheel_rate = rates.low_level_hz;
  sc.seed = cfg.seed;
  PoseSensor pose_sensor(sc);
  WheelSensor wheel_sensor(sc);
  NmpcController nmpc(cfg.ocp, cfg.nmpc_iterations, cfg.nmpc_cold_iterations);
  Supervisor sup(cfg.safety);
  const LemniscateParams lem = cfg.reference;
  const ReferenceFn ref = [lem](double t) { return lemniscate_reference(lem, t); };

  const nlohmann::json prov = provenance(cfg, model, "scenario");
  write_text_file((fs::path(out_dir) / "config.txt").string(), to_text(cfg));
  ChannelWriter pose_log((fs::path(out_dir) / "pose.csv").string(), "pose", rates.pose_hz,
                         {"x_true", "y_true", "yaw_true", "x_msr", "y_msr", "yaw_msr", "x_ref", "y_ref", "yaw_ref",
                          "wz_ref", "E", "state"},
                         prov);
  ChannelWriter nmpc_log((fs::path(out_dir) / "nmpc.csv").string(), "nmpc", rates.high_level_hz,
                         {"cost", "defect", "kkt_residual", "iterations", "cmd_R", "cmd_L", "active_mask", "status",
                          "bound_violation"},
                         prov);
  ChannelWriter ll_log((fs::path(out_dir) / "lowlevel.csv").string(), "lowlevel",
                       static_cast<double>(rates.low_level_hz) / cfg.lowlevel_decimation, kLowLevelColumns, prov);
  ChannelWriter safety_log((fs::path(out_dir) / "safety.csv").string(), "safety",
                           static_cast<double>(rates.low_level_hz) / cfg.lowlevel_decimation,
                           {"state", "E", "O", "reason", "cap_factor"}, prov);

  const RefSample r0 = ref(0.0);
  robot.reset(r0.pose, reference_wheel_rates(lem, 0.0, geom));

  // Latest-wins snapshots shared between the rate groups.
  Pose2 pose_msr = r0.pose;
  double pose_t = 0.0;
  double E = 0.0;
  Pose2 odom = r0.pose;  // pose sample propagated with wheel odometry between pose ticks
  WheelRates cmd = reference_wheel_rates(lem, 0.0, geom);
  double cmd_t = 0.0;
  WheelRates rate_msr = robot.wheel_rates();
  AdaptiveState adapt[2];
  adapt[0].chi = adapt[1].chi = cfg.gains.chi0;
  bool fault = false;

  RunResult res;
  res.dir = out_dir;
  double solve_time_sum = 0.0;
  const long long total = std::llround(cfg.run_duration() * rates.low_level_hz);
  std::optional<double> stop_time;
  long long k = 0;
  for (;; ++k) {
    const double t = tick_time(k, rates.low_level_hz);
    if (auto w = wheel_sensor.sample(robot.wheel_rates(), t)) rate_msr = *w;

    if (k % rates.pose_every() == 0) {
      if (auto p = pose_sensor.sample(robot.pose(), t)) {
        pose_msr = *p;
        pose_t = t;
        odom = pose_msr;
        const RefSample rs = ref(t);
        E = pose_error(pose_msr, rs.pose, cfg.error_weights);
        const Pose2& truth = robot.pose();
        pose_log.row(t, {truth.x, truth.y, truth.yaw, pose_msr.x, pose_msr.y, pose_msr.yaw, rs.pose.x, rs.pose.y,
                         rs.pose.yaw, rs.rate[2], E, static_cast<double>(sup.status().state)});
      }
    }

    if (cfg.scenario == Scenario::NoNmpc) {
      cmd = reference_wheel_rates(lem, t, geom);
      cmd_t = t;
    } else if (k % rates.high_level_every() == 0 && sup.status().state != SafetyState::SafeStop) {
      try {
        const auto out = nmpc.step(t, odom, rate_msr, ref);
        ++res.solves;
        solve_time_sum += out.report.wall_time_s;
        res.solve_time_max_s = std::max(res.solve_time_max_s, out.report.wall_time_s);
        nmpc_log.row(t, {out.report.cost, out.report.max_defect, out.report.kkt_residual,
                         static_cast<double>(out.report.iterations), out.command.right, out.command.left,
                         static_cast<double>(out.report.active_mask), static_cast<double>(out.report.status),
                         out.report.bound_violation});
        if (out.report.status == SolveStatus::Fault) {
          fault = true;
        } else {
          cmd = out.command;
          cmd_t = t;
        }
      } catch (const std::exception&) {
        fault = true;
      }
    }

    sup.monitor(E, false, fault);
    WheelRates shaped = sup.shape(cmd, dt);

    double u[2] = {0.0, 0.0};
    double u_ff[2] = {0.0, 0.0};
    double barrier = 0.0;
    const double msr[2] = {rate_msr.right, rate_msr.left};
    const double refv[2] = {shaped.right, shaped.left};
    if (sup.status().state != SafetyState::SafeStop) {
      try {
        for (int s = 0; s < 2; ++s) {
          const Side side = s == 0 ? Side::Right : Side::Left;
          if (cfg.scenario == Scenario::SdnnOnly) {
            u[s] = u_ff[s] = model.u_for_rate(side, refv[s]);
          } else {
            const ControlTerms terms = control(side, refv[s], msr[s], {E, cfg.safety.bound}, adapt[s], cfg.gains, model);
            u[s] = terms.u_total;
            u_ff[s] = terms.u_sdnn;
            barrier = terms.barrier;
            adapt[s].e = msr[s] - refv[s];
            adapt[s] = adapt_step(adapt[s], {E, cfg.safety.bound}, cfg.gains, dt);
          }
          if (!std::isfinite(u[s])) throw NumericalFault("non-finite actuator command");
        }
      } catch (const std::exception&) {
        // Barrier or numerical fault inside the loop: latch now and command nothing this tick.
        fault = true;
        sup.monitor(E, false, true);
        shaped = sup.shape(cmd, dt);
        u[0] = u[1] = u_ff[0] = u_ff[1] = barrier = 0.0;
      }
    }
    const SafetyStatus& status = sup.status();
    if (status.state == SafetyState::SafeStop && !stop_time) stop_time = t;

    if (k % cfg.lowlevel_decimation == 0) {
      const WheelRates truth = robot.wheel_rates();
      ll_log.row(t, {shaped.right, shaped.left, rate_msr.right, rate_msr.left, rate_msr.right - shaped.right,
                     rate_msr.left - shaped.left, truth.right, truth.left, u_ff[0], u_ff[1], u[0], u[1], adapt[0].chi,
                     adapt[1].chi, E, barrier, static_cast<double>(status.state), t - pose_t, t - cmd_t});
      safety_log.row(t, {static_cast<double>(status.state), E, cfg.safety.bound, static_cast<double>(status.reason),
                         status.cap_factor});
    }

    res.t_end = t;
    if (stop_time && t - *stop_time >= cfg.post_stop - 1e-12) break;
    if (k + 1 >= total) break;

    robot.step(u[0], u[1], t, dt);
    odom = integrate(odom, rate_msr, geom, dt, Integrator::Euler);
  }
  pose_log.close();
  nmpc_log.close();
  ll_log.close();
  safety_log.close();

  res.final_state = sup.status().state;
  res.reason = sup.status().reason;
  res.exit_code = res.final_state == SafetyState::SafeStop ? kExitSafeStop : kExitCompleted;
  res.solve_time_mean_s = res.solves > 0 ? solve_time_sum / res.solves : 0.0;
  finish(res, out_dir,
         {{"kind", "scenario"},
          {"scenario", std::string(to_string(cfg.scenario))},
          {"terrain", std::string(to_string(cfg.terrain))},
          {"seed", cfg.seed},
          {"ticks", k + 1},
          {"solves", res.solves}});
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return res;
}

RunResult run_step_test(const RunConfig& cfg_in, const SdnnModel& model, LowLevelPolicy policy,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto wall_start = std::chrono::steady_clock::now();
  RunConfig cfg = cfg_in;
  cfg.validate();
  fs::create_directories(out_dir);
  const RateSchedule& rates = cfg.rates;
  const double dt = rates.dt();

  DisturbanceProfile load;
  if (cfg.step.load != 0.0) load.steps.push_back({cfg.step.load_start, cfg.step.load, true, true});
  RobotPlant robot(cfg.plant, TerrainProfile{}, load);
  robot.reset(Pose2{}, WheelRates{0.0, 0.0});
  SensorConfig sc = cfg.sensors;
  sc.pose_rate = rates.pose_hz;
  sc.wheel_rate = rates.low_level_hz;
  sc.seed = cfg.seed;
  WheelSensor wheel_sensor(sc);

  nlohmann::json prov = provenance(cfg, model, "step-test");
  prov["policy"] = std::string(to_string(policy));
  prov["step_reference"] = cfg.step.reference;
  write_text_file((fs::path(out_dir) / "config.txt").string(), to_text(cfg));
  ChannelWriter ll_log((fs::path(out_dir) / "lowlevel.csv").string(), "lowlevel",
                       static_cast<double>(rates.low_level_hz) / cfg.lowlevel_decimation, kLowLevelColumns, prov);

  const double E = cfg.step.held_error;
  const double ref = cfg.step.reference;
  AdaptiveState adapt[2];
  adapt[0].chi = adapt[1].chi = cfg.gains.chi0;
  WheelRates rate_msr;
  RunResult res;
  res.dir = out_dir;
  const long long total = std::llround(cfg.step.duration * rates.low_level_hz);
  for (long long k = 0; k < total; ++k) {
    const double t = tick_time(k, rates.low_level_hz);
    if (auto w = wheel_sensor.sample(robot.wheel_rates(), t)) rate_msr = *w;
    const double msr[2] = {rate_msr.right, rate_msr.left};
    double u[2];
    double u_ff[2];
    double barrier = 0.0;
    for (int s = 0; s < 2; ++s) {
      const Side side = s == 0 ? Side::Right : Side::Left;
      if (policy == LowLevelPolicy::Sdnn) {
        u[s] = u_ff[s] = model.u_for_rate(side, ref);
      } else {
        const ControlTerms terms = control(side, ref, msr[s], {E, cfg.safety.bound}, adapt[s], cfg.gains, model);
        u[s] = terms.u_total;
        u_ff[s] = terms.u_sdnn;
        barrier = terms.barrier;
        adapt[s].e = msr[s] - ref;
        adapt[s] = adapt_step(adapt[s], {E, cfg.safety.bound}, cfg.gains, dt);
      }
    }
    if (k % cfg.lowlevel_decimation == 0) {
      const WheelRates truth = robot.wheel_rates();
      ll_log.row(t, {ref, ref, msr[0], msr[1], msr[0] - ref, msr[1] - ref, truth.right, truth.left, u_ff[0], u_ff[1],
                     u[0], u[1], adapt[0].chi, adapt[1].chi, E, barrier, 0.0, 0.0, 0.0});
    }
    res.t_end = t;
    if (k + 1 < total) robot.step(u[0], u[1], t, dt);
  }
  ll_log.close();
  finish(res, out_dir, {{"kind", "step-test"}, {"policy", std::string(to_string(policy))}, {"seed", cfg.seed}});
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return res;
}

}  // namespace lsmr
