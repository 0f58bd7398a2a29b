#include <fmt/format.h>
#include <fmt/ostream.h>

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lsmr/config.hpp"
#include "lsmr/metrics.hpp"
#include "lsmr/replay.hpp"
#include "lsmr/scenario.hpp"
#include "lsmr/training.hpp"

using namespace lsmr;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string model_path;
  std::optional<double> duration;
};

RunConfig load_run_config(const CommonOpts& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config_file(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.model_path.empty()) cfg.sdnn.model_path = o.model_path;
  if (o.duration) cfg.duration = *o.duration;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "Config file (key = value sections); defaults when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Run seed (sensor noise, terrain texture, disturbance phases)");
  cmd->add_option("--model", o.model_path, "SDNN model cache; trained and written when missing or stale");
}

void print_run(const RunResult& r) {
  const nlohmann::json& m = r.metrics;
  fmt::print("run dir      {}\n", r.dir);
  fmt::print("final state  {} ({})\n", to_string(r.final_state), to_string(r.reason));
  fmt::print("t_end        {:.3f} s\n", r.t_end);
  if (m.contains("max_E") && !m["max_E"].is_null()) fmt::print("max E        {:.4f}\n", m["max_E"].get<double>());
  if (m.contains("ape_mean") && !m["ape_mean"].is_null()) {
    fmt::print("APE mean     {:.4f} m\n", m["ape_mean"].get<double>());
  }
  if (r.solves > 0) {
    fmt::print("solves       {} (wall mean {:.2f} ms, max {:.2f} ms)\n", r.solves, 1e3 * r.solve_time_mean_s,
               1e3 * r.solve_time_max_s);
  }
  fmt::print("wall time    {:.1f} s\n", r.wall_time_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skid-steer tracking stack: NMPC over an SDNN/RSDNN low level with a barrier safety supervisor"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  std::string scenario;
  std::string terrain;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Closed-loop lemniscate run; exit 0 completed, 2 SafeStop, 1 error");
  run->add_option("--scenario", scenario, "no-nmpc | sdnn-only | full-rsdnn")->required();
  run->add_option("--terrain", terrain, "asphalt | soft-soil")->required();
  run->add_option("--out", run_out, "Run directory for telemetry")->required();
  run->add_option("--duration", run_opts.duration, "Seconds to simulate (0 = one lemniscate period)");
  add_common(run, run_opts);

  std::string plant_cfg;
  std::string model_out;
  auto* train = app.add_subcommand("train-sdnn", "Collect ramp data on the configured plant and train both sides");
  train->add_option("--plant", plant_cfg, "Config file providing the plant, sensor and sdnn sections")
      ->check(CLI::ExistingFile);
  train->add_option("--out", model_out, "Output model file (JSON)")->required();

  std::string metrics_dir;
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics of a run directory and print them");
  metrics->add_option("run-dir", metrics_dir)->required()->check(CLI::ExistingDirectory);

  std::string replay_dir;
  auto* replay_cmd = app.add_subcommand("replay", "Verify a run directory offline; exit 0 when every check passes");
  replay_cmd->add_option("run-dir", replay_dir)->required()->check(CLI::ExistingDirectory);

  CommonOpts step_opts;
  std::string policy;
  std::string step_out;
  auto* step = app.add_subcommand("step-test", "Constant wheel-rate step under a load torque, one low-level policy");
  step->add_option("--policy", policy, "sdnn | rsdnn")->required()->check(CLI::IsMember({"sdnn", "rsdnn"}));
  step->add_option("--out", step_out, "Run directory for telemetry")->required();
  add_common(step, step_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunConfig cfg = load_run_config(run_opts);
      cfg.scenario = parse_scenario(scenario);
      cfg.terrain = parse_terrain(terrain);
      const SdnnModel model = ensure_model(cfg, &std::cerr);
      const RunResult r = run_scenario(cfg, model, run_out);
      print_run(r);
      return r.exit_code;
    }
    if (*train) {
      RunConfig cfg = plant_cfg.empty() ? RunConfig{} : load_config_file(plant_cfg);
      const TrainingOutcome t = train_sdnn(cfg, &std::cerr);
      save_model_file(model_out, t.model);
      fmt::print("wrote {} (fingerprint {})\n", model_out, t.model.fingerprint);
      return 0;
    }
    if (*metrics) {
      fmt::print("{}", metrics_text(compute_metrics(metrics_dir)));
      return 0;
    }
    if (*replay_cmd) {
      const ReplayReport rep = replay(replay_dir);
      fmt::print("{}", rep.text());
      return rep.ok() ? 0 : 1;
    }
    if (*step) {
      const RunConfig cfg = load_run_config(step_opts);
      const SdnnModel model = ensure_model(cfg, &std::cerr);
      const RunResult r = run_step_test(cfg, model, policy == "sdnn" ? LowLevelPolicy::Sdnn : LowLevelPolicy::Rsdnn,
                                        step_out);
      fmt::print("{}", metrics_text(r.metrics));
      return 0;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
