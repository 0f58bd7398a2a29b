#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>

#include "lsmr/dataset.hpp"
#include "lsmr/lm.hpp"
#include "lsmr/lowlevel.hpp"
#include "lsmr/nmpc.hpp"
#include "lsmr/plant.hpp"
#include "lsmr/reference.hpp"
#include "lsmr/safety.hpp"

namespace lsmr {

enum class Scenario { NoNmpc, SdnnOnly, FullRsdnn };

std::string_view to_string(Scenario s);
std::string_view to_string(TerrainKind k);
Scenario parse_scenario(std::string_view name);
TerrainKind parse_terrain(std::string_view name);

/// Loop rates, all derived from one virtual 1 ms-resolution clock.
struct RateSchedule {
  int low_level_hz = 1000;
  int pose_hz = 20;
  int high_level_hz = 50;

  void validate() const;
  double dt() const { return 1.0 / low_level_hz; }
  int pose_every() const { return low_level_hz / pose_hz; }
  int high_level_every() const { return low_level_hz / high_level_hz; }
};

/// Terrain knobs. Negative values mean "use the preset for the chosen terrain kind".
struct TerrainOverrides {
  double base_slip = -1.0;
  double texture = -1.0;
  double patch_slip = -1.0;
  double patch_radius = -1.0;
  double turn_resistance = -1.0;
};

/// Bounded disturbance torque applied to both sides during scenario runs.
struct DisturbanceConfig {
  double band_amplitude = 0.005;
  double band_frequency = 0.5;  // Hz
  double load_step_time = 0.0;
  double load_step_magnitude = 0.0;

  DisturbanceProfile profile(std::uint64_t seed) const;
};

struct SdnnTrainingConfig {
  std::string model_path = "sdnn_model.json";
  RampProtocol protocol{
      .leg_duration = 250.0, .amplitude = 0.0, .log_rate = 10.0, .sim_dt = 1e-3, .median_taps = 5, .dead_zone = 0.005};
  // Deliberately tight. The NMPC re-anchors every solve at the measured wheel rate and may only step
  // 0.01 rad/s per stage, so a steady feedforward offset of that size leaves it no authority.
  TrainOptions train{.hidden = {35, 20, 12, 10, 8},
                     .target_mse = 1e-6,
                     .min_grad = 1e-8,
                     .max_epochs = 200,
                     .max_val_fail = 6,
                     .mu_init = 1e-3,
                     .beta = 10.0,
                     .mu_max = 1e10,
                     .seed = 1};
  std::uint64_t data_seed = 7;  // sensor noise and split during collection
};

/// Constant wheel-rate reference with an optional load step, used for the actuation-level comparison.
struct StepTestConfig {
  double reference = 0.5;     // rad/s, both sides
  double duration = 20.0;     // s
  double load = 0.04;         // disturbance torque outside the training distribution
  double load_start = 0.0;    // s
  double held_error = 0.2;    // pose error held for the barrier term, m
};

struct RunConfig {
  Scenario scenario = Scenario::FullRsdnn;
  TerrainKind terrain = TerrainKind::Asphalt;
  std::uint64_t seed = 1;
  double duration = 0.0;      // 0 = one reference period
  double post_stop = 2.0;     // s of logging after SafeStop
  RateSchedule rates;
  PlantConfig plant;
  SensorConfig sensors;
  DisturbanceConfig disturbance;
  TerrainOverrides terrain_overrides;
  LemniscateParams reference;
  OcpConfig ocp;
  int nmpc_iterations = 1;
  int nmpc_cold_iterations = 50;
  RsdnnGains gains;
  SafetyConfig safety;
  Eigen::Vector3d error_weights = Eigen::Vector3d::Ones();
  SdnnTrainingConfig sdnn;
  StepTestConfig step;
  int lowlevel_decimation = 1;  // log every n-th 1 kHz tick

  void validate() const;
  double run_duration() const { return duration > 0.0 ? duration : reference.period; }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses `[section]` headers and `key = value` lines on top of `base`. `#` starts a comment.
/// Unknown sections or keys and malformed values raise ConfigError naming the line.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Canonical text form of every key; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& cfg);

/// Stable 64-bit FNV-1a digest as 16 hex digits.
std::string fingerprint(std::string_view text);

}  // namespace lsmr
