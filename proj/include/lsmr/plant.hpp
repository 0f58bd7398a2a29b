#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lsmr/se2.hpp"

namespace lsmr {

enum class Side { Right = 0, Left = 1 };

/// Synthetic per-side actuation (the black box the SDNN learns).
///
/// The control signal u (kRPM) passes through a static nonlinearity
///   g(u) = gain * s(w),  w = deadzone(u) / (u_rated - deadband) clamped to [-1, 1],
///   s(w) = w - softening * w^3 / 3,
/// feeds a first-order lag with time constant lag_tau, and drives
///   inertia * d(rate)/dt = lag + F(rate) + d,  F(rate) = -viscous * rate - coulomb * tanh(rate / coulomb_speed).
/// g and F are globally Lipschitz; the tanh stands in for sign() so the friction stays Lipschitz too.
struct ActuationParams {
  double inertia = 0.1;
  double viscous = 1.0;
  double coulomb = 0.01;
  double coulomb_speed = 0.02;
  double gain = 1.6;
  double u_rated = 1.5;
  double deadband = 0.005;
  double softening = 0.6;
  double lag_tau = 0.001;
  int substeps = 4;

  double drive(double u) const;
  double friction(double rate) const;
  void validate() const;
};

struct ActuationState {
  double rate = 0.0;   // wheel angular velocity, rad/s
  double drive = 0.0;  // lag state, torque units
};

/// Advances one side of the actuation by dt under control u and disturbance torque d (RK4 substeps).
ActuationState step_actuation(const ActuationState& state, const ActuationParams& p, double u, double dt,
                              double disturbance = 0.0);

/// Root of g(u) + F(rate) = 0 (bisection); the resting rate under constant u with no disturbance.
double steady_state_rate(const ActuationParams& p, double u);

/// Actuation state that is at rest at `rate` with zero disturbance.
ActuationState equilibrium_state(const ActuationParams& p, double rate);

enum class TerrainKind { Asphalt, SoftSoil };

struct SlipPatch {
  double x = 0.0;
  double y = 0.0;
  double radius = 1.0;  // Gaussian sigma, m
  double slip_right = 0.0;
  double slip_left = 0.0;
};

/// Deterministic slip field. Slip ratios are clamped to [0, 0.9].
struct TerrainProfile {
  TerrainKind kind = TerrainKind::Asphalt;
  double base_slip_right = 0.0;
  double base_slip_left = 0.0;
  std::vector<SlipPatch> patches;
  double texture_amplitude = 0.0;  // seeded smooth ripple added to both sides
  double turn_resistance = 0.0;    // yaw-opposing load torque per rad/s of body yaw rate
  std::uint64_t seed = 0;

  /// Per-side slip ratio (right, left) at a world position.
  std::pair<double, double> slip(double x, double y) const;
  /// Upper bound of the slip field over the plane (used to check the asphalt limit).
  double max_slip_bound() const;
};

/// Asphalt slip may never exceed this.
inline constexpr double kAsphaltSlipLimit = 0.02;

/// Throws std::invalid_argument when the profile breaks its invariants.
void validate(const TerrainProfile& terrain);

WheelRates apply_slip(const WheelRates& rates_true, const Pose2& pose, const TerrainProfile& terrain);

struct SensorConfig {
  double pose_rate = 20.0;    // Hz
  double wheel_rate = 1000.0;  // Hz
  double pose_noise_xy = 0.01;
  double pose_noise_yaw = 0.002;
  double wheel_noise = 0.001;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Simulated pose provider standing in for visual SLAM: emits a noisy pose only on rate tick boundaries.
class PoseSensor {
 public:
  explicit PoseSensor(const SensorConfig& cfg);
  std::optional<Pose2> sample(const Pose2& truth, double t);

 private:
  SensorConfig cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_{0.0, 1.0};
  long long last_tick_ = -1;
};

/// In-wheel speed sensors, both sides, on the wheel-rate tick boundaries.
class WheelSensor {
 public:
  explicit WheelSensor(const SensorConfig& cfg);
  std::optional<WheelRates> sample(const WheelRates& truth, double t);

 private:
  SensorConfig cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_{0.0, 1.0};
  long long last_tick_ = -1;
};

struct LoadStep {
  double t_start = 0.0;
  double magnitude = 0.0;
  bool right = true;
  bool left = true;
};

/// Bounded disturbance torque: band-limited ripple plus load steps.
struct DisturbanceProfile {
  double band_amplitude = 0.0;  // bound of the ripple
  double band_frequency = 0.5;  // Hz, centre of the band
  std::vector<LoadStep> steps;
  std::uint64_t seed = 0;

  double value(double t, Side side) const;
};

struct PlantConfig {
  RobotGeometry geometry;
  ActuationParams right;
  // The two hydraulic circuits are not identical; one SDNN per side has to absorb that.
  ActuationParams left{.inertia = 0.11, .viscous = 0.95};
};

/// Ground-truth robot: two actuation channels, terrain slip and planar kinematics.
class RobotPlant {
 public:
  RobotPlant(PlantConfig cfg, TerrainProfile terrain, DisturbanceProfile disturbance);

  /// Places the robot at `pose` with both sides resting at `rates`.
  void reset(const Pose2& pose, const WheelRates& rates);
  /// Applies control signals (kRPM) for dt seconds starting at time t.
  void step(double u_right, double u_left, double t, double dt);

  const Pose2& pose() const { return pose_; }
  WheelRates wheel_rates() const { return {right_.rate, left_.rate}; }
  WheelRates effective_rates() const { return apply_slip(wheel_rates(), pose_, terrain_); }
  const PlantConfig& config() const { return cfg_; }
  const TerrainProfile& terrain() const { return terrain_; }

 private:
  PlantConfig cfg_;
  TerrainProfile terrain_;
  DisturbanceProfile disturbance_;
  Pose2 pose_;
  ActuationState right_;
  ActuationState left_;
};

}  // namespace lsmr
