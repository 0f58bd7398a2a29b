#include "lsmr/reference.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lsmr {

void LemniscateParams::validate() const {
  if (!(length > 0.0) || !(width > 0.0) || !(period > 0.0)) {
    throw std::invalid_argument("lemniscate: length, width and period must be positive");
  }
}

RefSample lemniscate_reference(const LemniscateParams& p, double t) {
  const double a = 0.5 * p.length;
  const double b = 0.5 * p.width;
  const double w = 2.0 * std::numbers::pi / p.period;
  const double phi = w * t;
  const double s1 = std::sin(phi), c1 = std::cos(phi);
  const double s2 = std::sin(2.0 * phi), c2 = std::cos(2.0 * phi);
  const double dx = a * c1 * w;
  const double dy = 2.0 * b * c2 * w;
  const double ddx = -a * s1 * w * w;
  const double ddy = -4.0 * b * s2 * w * w;
  RefSample r;
  r.pose = {p.center_x + a * s1, p.center_y + b * s2, std::atan2(dy, dx)};
  r.rate = {dx, dy, (dx * ddy - dy * ddx) / (dx * dx + dy * dy)};
  return r;
}

WheelRates reference_wheel_rates(const LemniscateParams& p, double t, const RobotGeometry& geom) {
  const RefSample r = lemniscate_reference(p, t);
  return twist_to_wheel(std::hypot(r.rate[0], r.rate[1]), r.rate[2], geom);
}

}  // namespace lsmr
