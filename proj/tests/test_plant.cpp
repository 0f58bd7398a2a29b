#include <cmath>
#include <vector>

#include "doctest.h"
#include "lsmr/plant.hpp"

using namespace lsmr;
using doctest::Approx;

namespace {

// Same model written out directly: tiny-step explicit Euler of the lag + rate ODE.
double fine_oracle(const ActuationParams& p, double u, double rate0, double drive0, double t, double h) {
  const double mag = std::max(std::abs(u) - p.deadband, 0.0);
  double w = std::copysign(mag, u) / (p.u_rated - p.deadband);
  w = std::max(-1.0, std::min(1.0, w));
  const double g = p.gain * (w - p.softening * w * w * w / 3.0);
  double rate = rate0, drive = drive0;
  const long n = std::lround(t / h);
  for (long i = 0; i < n; ++i) {
    const double fr = -p.viscous * rate - p.coulomb * std::tanh(rate / p.coulomb_speed);
    const double dr = (drive + fr) / p.inertia;
    const double dd = (g - drive) / p.lag_tau;
    rate += h * dr;
    drive += h * dd;
  }
  return rate;
}

double bisect_root(const ActuationParams& p, double u) {
  double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (p.drive(u) - p.viscous * m - p.coulomb * std::tanh(m / p.coulomb_speed) > 0 ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("actuation at rest stays at rest") {
  ActuationParams p;
  ActuationState s{};
  for (int i = 0; i < 1000; ++i) s = step_actuation(s, p, 0.0, 1e-3);
  CHECK(s.rate == 0.0);
  CHECK(s.drive == 0.0);
}

TEST_CASE("constant u converges to the steady-state root") {
  ActuationParams p;
  for (double u : {0.3, 0.6, 1.0, -0.8}) {
    ActuationState s{};
    for (int i = 0; i < 20000; ++i) s = step_actuation(s, p, u, 1e-3);
    CHECK(std::abs(s.rate - bisect_root(p, u)) < 1e-4);
    CHECK(steady_state_rate(p, u) == Approx(bisect_root(p, u)).epsilon(1e-10));
  }
}

TEST_CASE("1 ms steps agree with a fine-step oracle") {
  ActuationParams p;
  ActuationState s{};
  double max_dev = 0.0;
  for (int i = 1; i <= 2000; ++i) {
    s = step_actuation(s, p, 0.9, 1e-3);
    if (i % 100 == 0) {
      max_dev = std::max(max_dev, std::abs(s.rate - fine_oracle(p, 0.9, 0.0, 0.0, i * 1e-3, 1e-6)));
    }
  }
  CHECK(max_dev < 1e-5);
}

TEST_CASE("passive friction: rate magnitude never grows with u = 0") {
  ActuationParams p;
  for (double r0 : {0.7, -0.4, 0.01}) {
    ActuationState s = equilibrium_state(p, r0);
    s.drive = 0.0;  // no stored lag energy
    double prev = std::abs(s.rate);
    for (int i = 0; i < 3000; ++i) {
      s = step_actuation(s, p, 0.0, 1e-3);
      CHECK(std::abs(s.rate) <= prev + 1e-15);
      prev = std::abs(s.rate);
    }
  }
}

TEST_CASE("drive nonlinearity is odd, saturating and zero in the deadband") {
  ActuationParams p;
  CHECK(p.drive(0.004) == 0.0);
  CHECK(p.drive(-0.004) == 0.0);
  CHECK(p.drive(-0.7) == Approx(-p.drive(0.7)));
  CHECK(p.drive(5.0) == Approx(p.drive(p.u_rated)));
  double prev = p.drive(-3.0);
  for (double u = -3.0; u <= 3.0; u += 0.01) {
    CHECK(p.drive(u) >= prev - 1e-15);
    prev = p.drive(u);
  }
}

TEST_CASE("slip examples") {
  TerrainProfile asphalt;
  asphalt.base_slip_right = asphalt.base_slip_left = 0.001;
  validate(asphalt);
  for (double x = -5; x < 25; x += 1.7) {
    const auto eff = apply_slip({0.5, 0.4}, {x, 0.3 * x, 0}, asphalt);
    CHECK(std::abs(eff.right - 0.5) <= 0.02 * 0.5);
    CHECK(std::abs(eff.left - 0.4) <= 0.02 * 0.4);
  }
  TerrainProfile none;
  const auto eff = apply_slip({0.5, -0.4}, {1, 2, 3}, none);
  CHECK(eff.right == 0.5);
  CHECK(eff.left == -0.4);

  TerrainProfile bad;
  bad.base_slip_right = 0.03;
  CHECK_THROWS(validate(bad));
}

TEST_CASE("slip never reverses a wheel") {
  TerrainProfile soil;
  soil.kind = TerrainKind::SoftSoil;
  soil.base_slip_right = soil.base_slip_left = 0.03;
  soil.patches.push_back({3.0, 3.0, 1.5, 0.8, 0.2});
  soil.texture_amplitude = 0.05;
  soil.seed = 4;
  for (double x = 0; x < 8; x += 0.25) {
    for (double y = 0; y < 8; y += 0.25) {
      const auto [sr, sl] = soil.slip(x, y);
      CHECK(sr >= 0.0);
      CHECK(sr <= 0.9);
      CHECK(sl >= 0.0);
      CHECK(sl <= 0.9);
      const auto e = apply_slip({0.6, -0.3}, {x, y, 0}, soil);
      CHECK(e.right >= 0.0);
      CHECK(e.left <= 0.0);
    }
  }
}

TEST_CASE("right-only slip patch curves the robot toward the right side") {
  // Uniform slip 0.3 on the right: effective rates (0.35, 0.5) give a clockwise arc.
  TerrainProfile soil;
  soil.kind = TerrainKind::SoftSoil;
  soil.base_slip_right = 0.3;
  PlantConfig cfg;
  cfg.right.coulomb = 0.0;
  cfg.left = cfg.right;
  RobotPlant plant(cfg, soil, {});
  plant.reset({0, 0, 0}, {0.5, 0.5});
  // Hold the rates by commanding the steady-state input for 0.5 rad/s.
  double lo = 0, hi = 3;
  for (int i = 0; i < 100; ++i) {
    const double m = 0.5 * (lo + hi);
    (steady_state_rate(cfg.right, m) < 0.5 ? lo : hi) = m;
  }
  for (int i = 0; i < 1000; ++i) plant.step(lo, lo, i * 1e-3, 1e-3);
  const double vx = 0.5 * (0.35 + 0.5), wz = 0.5 * (0.35 - 0.5);
  CHECK(plant.pose().yaw < 0.0);
  CHECK(plant.pose().yaw == Approx(wz * 1.0).epsilon(1e-4));
  const double rad = vx / wz;
  CHECK(plant.pose().x == Approx(rad * std::sin(wz)).epsilon(1e-4));
  CHECK(plant.pose().y == Approx(rad * (1 - std::cos(wz))).epsilon(1e-3));
}

TEST_CASE("pose sensor: tick boundaries, determinism and noise level") {
  SensorConfig cfg;
  cfg.pose_noise_xy = 0.0;
  cfg.pose_noise_yaw = 0.0;
  PoseSensor exact(cfg);
  int ticks = 0;
  for (int k = 0; k < 1000; ++k) {
    const double t = k * 1e-3;
    if (auto p = exact.sample({1.0, 2.0, 0.5}, t)) {
      ++ticks;
      CHECK(p->x == 1.0);
      CHECK(p->yaw == 0.5);
      CHECK(k % 50 == 0);
    }
  }
  CHECK(ticks == 20);

  cfg.pose_noise_xy = 0.05;
  cfg.pose_noise_yaw = 0.002;
  cfg.seed = 9;
  PoseSensor a(cfg), b(cfg);
  std::vector<double> xs, yaws;
  for (int k = 0; k < 10000; ++k) {
    const double t = k / 20.0;
    auto pa = a.sample({0, 0, 0}, t);
    auto pb = b.sample({0, 0, 0}, t);
    REQUIRE(pa);
    REQUIRE(pb);
    CHECK(pa->x == pb->x);
    CHECK(pa->yaw == pb->yaw);
    xs.push_back(pa->x);
    yaws.push_back(pa->yaw);
  }
  auto stddev = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
  };
  CHECK(std::abs(stddev(xs) / 0.05 - 1.0) < 0.05);
  CHECK(std::abs(stddev(yaws) / 0.002 - 1.0) < 0.05);
}

TEST_CASE("wheel sensor: zero noise identity, determinism and noise level") {
  SensorConfig cfg;
  cfg.wheel_noise = 0.0;
  WheelSensor exact(cfg);
  auto m = exact.sample({0.3, 0.2}, 0.0);
  REQUIRE(m);
  CHECK(m->right == 0.3);
  CHECK_FALSE(exact.sample({0.3, 0.2}, 0.0));  // same tick twice

  cfg.wheel_noise = 0.01;
  WheelSensor a(cfg), b(cfg);
  double s2 = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    auto ma = a.sample({0, 0}, k * 1e-3);
    auto mb = b.sample({0, 0}, k * 1e-3);
    REQUIRE(ma);
    CHECK(ma->right == mb->right);
    s2 += ma->right * ma->right;
  }
  CHECK(std::abs(std::sqrt(s2 / n) / 0.01 - 1.0) < 0.05);
}

TEST_CASE("sensor config validation") {
  SensorConfig cfg;
  cfg.wheel_rate = 10.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.pose_rate = 0.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("disturbance ripple is bounded and steps switch on") {
  DisturbanceProfile d;
  d.band_amplitude = 0.05;
  d.steps.push_back({2.0, 0.1, true, false});
  for (double t = 0; t < 10; t += 0.01) {
    const double r = d.value(t, Side::Right), l = d.value(t, Side::Left);
    CHECK(std::abs(l) <= 0.05 + 1e-12);
    if (t < 2.0) CHECK(std::abs(r) <= 0.05 + 1e-12);
    else CHECK(std::abs(r - 0.1) <= 0.05 + 1e-12);
  }
}
