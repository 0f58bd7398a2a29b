#include "lsmr/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lsmr {

double ActuationParams::drive(double u) const {
  const double mag = std::max(std::abs(u) - deadband, 0.0);
  const double w = std::clamp(std::copysign(mag, u) / (u_rated - deadband), -1.0, 1.0);
  return gain * (w - softening * w * w * w / 3.0);
}

double ActuationParams::friction(double rate) const {
  return -viscous * rate - coulomb * std::tanh(rate / coulomb_speed);
}

void ActuationParams::validate() const {
  if (!(inertia > 0.0) || !(viscous > 0.0) || coulomb < 0.0 || !(coulomb_speed > 0.0) || !(gain > 0.0) ||
      !(u_rated > deadband) || deadband < 0.0 || softening < 0.0 || softening >= 1.0 || !(lag_tau > 0.0) ||
      substeps < 1) {
    throw std::invalid_argument("invalid actuation parameters");
  }
}

namespace {

struct Deriv {
  double rate;
  double drive;
};

Deriv actuation_rhs(const ActuationState& s, const ActuationParams& p, double g_u, double d) {
  return {(s.drive + p.friction(s.rate) + d) / p.inertia, (g_u - s.drive) / p.lag_tau};
}

ActuationState add(const ActuationState& s, const Deriv& k, double h) {
  return {s.rate + h * k.rate, s.drive + h * k.drive};
}

}  // namespace

ActuationState step_actuation(const ActuationState& state, const ActuationParams& p, double u, double dt,
                              double disturbance) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_actuation: dt must be positive");
  const double g_u = p.drive(u);
  const double h = dt / p.substeps;
  ActuationState s = state;
  for (int i = 0; i < p.substeps; ++i) {
    const Deriv k1 = actuation_rhs(s, p, g_u, disturbance);
    const Deriv k2 = actuation_rhs(add(s, k1, 0.5 * h), p, g_u, disturbance);
    const Deriv k3 = actuation_rhs(add(s, k2, 0.5 * h), p, g_u, disturbance);
    const Deriv k4 = actuation_rhs(add(s, k3, h), p, g_u, disturbance);
    s.rate += h / 6.0 * (k1.rate + 2.0 * k2.rate + 2.0 * k3.rate + k4.rate);
    s.drive += h / 6.0 * (k1.drive + 2.0 * k2.drive + 2.0 * k3.drive + k4.drive);
  }
  return s;
}

double steady_state_rate(const ActuationParams& p, double u) {
  const double g_u = p.drive(u);
  // g(u) + F(rate) is strictly decreasing in rate.
  double hi = (std::abs(g_u) + p.coulomb) / p.viscous + 1.0;
  double lo = -hi;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g_u + p.friction(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ActuationState equilibrium_state(const ActuationParams& p, double rate) { return {rate, -p.friction(rate)}; }

namespace {

// Cheap deterministic uniform draws for parameters evaluated every tick.
double splitmix_unit(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

struct Ripple {
  double kx[3];
  double ky[3];
  double phase[3];
};

// Wavelengths of 6-12 m keep the ripple smooth on the scale of the robot.
Ripple make_ripple(std::uint64_t seed, int channel) {
  std::uint64_t state = seed * 2654435761ULL + static_cast<std::uint64_t>(channel) * 97ULL + 11ULL;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Ripple r{};
  for (int j = 0; j < 3; ++j) {
    const double k = two_pi / 12.0 + splitmix_unit(state) * (two_pi / 6.0 - two_pi / 12.0);
    const double dir = two_pi * splitmix_unit(state);
    r.kx[j] = k * std::cos(dir);
    r.ky[j] = k * std::sin(dir);
    r.phase[j] = two_pi * splitmix_unit(state);
  }
  return r;
}

double ripple_value(const Ripple& r, double x, double y) {
  double acc = 0.0;
  for (int j = 0; j < 3; ++j) acc += 0.5 * (1.0 + std::sin(r.kx[j] * x + r.ky[j] * y + r.phase[j]));
  return acc / 3.0;  // in [0, 1]
}

}  // namespace

std::pair<double, double> TerrainProfile::slip(double x, double y) const {
  double right = base_slip_right;
  double left = base_slip_left;
  for (const SlipPatch& p : patches) {
    const double d2 = (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y);
    const double w = std::exp(-0.5 * d2 / (p.radius * p.radius));
    right += p.slip_right * w;
    left += p.slip_left * w;
  }
  if (texture_amplitude > 0.0) {
    right += texture_amplitude * ripple_value(make_ripple(seed, 0), x, y);
    left += texture_amplitude * ripple_value(make_ripple(seed, 1), x, y);
  }
  return {std::clamp(right, 0.0, 0.9), std::clamp(left, 0.0, 0.9)};
}

double TerrainProfile::max_slip_bound() const {
  double right = base_slip_right + texture_amplitude;
  double left = base_slip_left + texture_amplitude;
  for (const SlipPatch& p : patches) {
    right += std::max(p.slip_right, 0.0);
    left += std::max(p.slip_left, 0.0);
  }
  return std::min(std::max(right, left), 0.9);
}

void validate(const TerrainProfile& terrain) {
  if (terrain.base_slip_right < 0.0 || terrain.base_slip_left < 0.0 || terrain.texture_amplitude < 0.0 ||
      terrain.turn_resistance < 0.0) {
    throw std::invalid_argument("terrain: slip and resistance terms must be non-negative");
  }
  for (const SlipPatch& p : terrain.patches) {
    if (!(p.radius > 0.0) || p.slip_right < 0.0 || p.slip_left < 0.0) {
      throw std::invalid_argument("terrain: invalid slip patch");
    }
  }
  if (terrain.kind == TerrainKind::Asphalt && terrain.max_slip_bound() > kAsphaltSlipLimit) {
    throw std::invalid_argument("terrain: asphalt slip exceeds 0.02");
  }
}

WheelRates apply_slip(const WheelRates& rates_true, const Pose2& pose, const TerrainProfile& terrain) {
  const auto [sr, sl] = terrain.slip(pose.x, pose.y);
  return {(1.0 - sr) * rates_true.right, (1.0 - sl) * rates_true.left};
}

void SensorConfig::validate() const {
  if (!(pose_rate > 0.0) || !(wheel_rate > 0.0) || wheel_rate < pose_rate) {
    throw std::invalid_argument("sensor rates must be positive with wheel_rate >= pose_rate");
  }
  if (pose_noise_xy < 0.0 || pose_noise_yaw < 0.0 || wheel_noise < 0.0) {
    throw std::invalid_argument("sensor noise must be non-negative");
  }
}

namespace {

// Returns the tick index when t lies on a rate boundary not yet emitted.
std::optional<long long> new_tick(double t, double rate, long long last) {
  const double pos = t * rate;
  const long long idx = std::llround(pos);
  if (std::abs(pos - static_cast<double>(idx)) > 1e-6 || idx <= last) return std::nullopt;
  return idx;
}

}  // namespace

PoseSensor::PoseSensor(const SensorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::seed_seq seq{cfg.seed, std::uint64_t{0x9053}};
  rng_.seed(seq);
}

std::optional<Pose2> PoseSensor::sample(const Pose2& truth, double t) {
  const auto tick = new_tick(t, cfg_.pose_rate, last_tick_);
  if (!tick) return std::nullopt;
  last_tick_ = *tick;
  const double nx = unit_(rng_);
  const double ny = unit_(rng_);
  const double nyaw = unit_(rng_);
  return Pose2{truth.x + cfg_.pose_noise_xy * nx, truth.y + cfg_.pose_noise_xy * ny,
               wrap_angle(truth.yaw + cfg_.pose_noise_yaw * nyaw)};
}

WheelSensor::WheelSensor(const SensorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::seed_seq seq{cfg.seed, std::uint64_t{0x7e1}};
  rng_.seed(seq);
}

std::optional<WheelRates> WheelSensor::sample(const WheelRates& truth, double t) {
  const auto tick = new_tick(t, cfg_.wheel_rate, last_tick_);
  if (!tick) return std::nullopt;
  last_tick_ = *tick;
  const double nr = unit_(rng_);
  const double nl = unit_(rng_);
  return WheelRates{truth.right + cfg_.wheel_noise * nr, truth.left + cfg_.wheel_noise * nl};
}

double DisturbanceProfile::value(double t, Side side) const {
  double d = 0.0;
  if (band_amplitude > 0.0) {
    // Three tones spread around the band centre, seeded phases; |ripple| <= band_amplitude.
    std::uint64_t state = seed + (side == Side::Right ? 17ULL : 29ULL);
    constexpr double spread[3] = {0.7, 1.0, 1.3};
    for (double s : spread) {
      const double phase = 2.0 * std::numbers::pi * splitmix_unit(state);
      d += band_amplitude / 3.0 * std::sin(2.0 * std::numbers::pi * band_frequency * s * t + phase);
    }
  }
  for (const LoadStep& step : steps) {
    const bool applies = side == Side::Right ? step.right : step.left;
    if (applies && t >= step.t_start) d += step.magnitude;
  }
  return d;
}

RobotPlant::RobotPlant(PlantConfig cfg, TerrainProfile terrain, DisturbanceProfile disturbance)
    : cfg_(cfg), terrain_(std::move(terrain)), disturbance_(std::move(disturbance)) {
  if (!cfg_.geometry.valid()) throw std::invalid_argument("invalid robot geometry");
  cfg_.right.validate();
  cfg_.left.validate();
  validate(terrain_);
}

void RobotPlant::reset(const Pose2& pose, const WheelRates& rates) {
  pose_ = pose;
  right_ = equilibrium_state(cfg_.right, rates.right);
  left_ = equilibrium_state(cfg_.left, rates.left);
}

void RobotPlant::step(double u_right, double u_left, double t, double dt) {
  const WheelRates eff_start = effective_rates();
  const double yaw_rate = wheel_to_twist(eff_start, cfg_.geometry).wz;
  // Skid-steer turning resistance loads the outer side and pushes the inner one.
  const double d_right = disturbance_.value(t, Side::Right) - terrain_.turn_resistance * yaw_rate;
  const double d_left = disturbance_.value(t, Side::Left) + terrain_.turn_resistance * yaw_rate;
  right_ = step_actuation(right_, cfg_.right, u_right, dt, d_right);
  left_ = step_actuation(left_, cfg_.left, u_left, dt, d_left);
  const WheelRates eff_end = apply_slip(wheel_rates(), pose_, terrain_);
  const WheelRates mean{0.5 * (eff_start.right + eff_end.right), 0.5 * (eff_start.left + eff_end.left)};
  pose_ = integrate(pose_, mean, cfg_.geometry, dt, Integrator::RK4);
}

}  // namespace lsmr
