#include <cmath>

#include "doctest.h"
#include "lsmr/reference.hpp"

using namespace lsmr;
using doctest::Approx;

TEST_CASE("bounding box is 19 x 10") {
  const LemniscateParams p;
  double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
  const int n = 4000;  // multiple of 8 hits the x and y extremes exactly
  for (int i = 0; i <= n; ++i) {
    const RefSample s = lemniscate_reference(p, p.period * i / n);
    xmin = std::min(xmin, s.pose.x);
    xmax = std::max(xmax, s.pose.x);
    ymin = std::min(ymin, s.pose.y);
    ymax = std::max(ymax, s.pose.y);
  }
  CHECK(std::abs(xmax - xmin - 19.0) < 1e-9);
  CHECK(std::abs(ymax - ymin - 10.0) < 1e-9);
}

TEST_CASE("curve is closed") {
  const LemniscateParams p;
  const RefSample a = lemniscate_reference(p, 0.0);
  const RefSample b = lemniscate_reference(p, p.period);
  CHECK(std::abs(a.pose.x - b.pose.x) < 1e-9);
  CHECK(std::abs(a.pose.y - b.pose.y) < 1e-9);
  CHECK(std::abs(wrap_angle(a.pose.yaw - b.pose.yaw)) < 1e-9);
}

TEST_CASE("analytic rates match finite differences") {
  const LemniscateParams p;
  const double h = 1e-4;
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double t = 0.237 * i + 0.01;
    const RefSample s = lemniscate_reference(p, t);
    const RefSample sp = lemniscate_reference(p, t + h);
    const RefSample sm = lemniscate_reference(p, t - h);
    const Eigen::Vector3d fd((sp.pose.x - sm.pose.x) / (2 * h), (sp.pose.y - sm.pose.y) / (2 * h),
                             wrap_angle(sp.pose.yaw - sm.pose.yaw) / (2 * h));
    worst = std::max(worst, (s.rate - fd).norm() / s.rate.norm());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("heading is tangent and wheel rates stay inside [0, 0.8]") {
  const LemniscateParams p;
  const RobotGeometry geom;
  for (int i = 0; i < 2400; ++i) {
    const double t = p.period * i / 2400.0;
    const RefSample s = lemniscate_reference(p, t);
    // Zero lateral velocity in the body frame.
    CHECK(std::abs(-std::sin(s.pose.yaw) * s.rate[0] + std::cos(s.pose.yaw) * s.rate[1]) < 1e-12);
    const WheelRates w = reference_wheel_rates(p, t, geom);
    CHECK(w.right >= 0.0);
    CHECK(w.left >= 0.0);
    CHECK(w.right <= 0.8);
    CHECK(w.left <= 0.8);
    const BodyTwist tw = wheel_to_twist(w, geom);
    CHECK(tw.vx == Approx(std::hypot(s.rate[0], s.rate[1])));
    CHECK(tw.wz == Approx(s.rate[2]));
  }
}

TEST_CASE("invalid parameters are rejected") {
  LemniscateParams p;
  p.period = 0.0;
  CHECK_THROWS(p.validate());
  p = {};
  p.width = -1.0;
  CHECK_THROWS(p.validate());
}
