#include "lsmr/se2.hpp"

#include <cmath>
#include <numbers>

namespace lsmr {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(a, two_pi);  // [-pi, pi]
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

Eigen::Matrix<double, 3, 2> RobotGeometry::jacobian() const {
  Eigen::Matrix<double, 3, 2> j;
  j << 1.0, 1.0, 0.0, 0.0, 1.0 / half_track, -1.0 / half_track;
  return 0.5 * wheel_radius * j;
}

BodyTwist wheel_to_twist(const WheelRates& rates, const RobotGeometry& geom) {
  const double r = geom.wheel_radius;
  return {0.5 * r * (rates.right + rates.left), 0.0,
          0.5 * r / geom.half_track * (rates.right - rates.left)};
}

WheelRates twist_to_wheel(double vx, double wz, const RobotGeometry& geom) {
  const double r = geom.wheel_radius;
  return {(vx + geom.half_track * wz) / r, (vx - geom.half_track * wz) / r};
}

WorldVelocity adjoint_to_world(const Pose2& pose, const BodyTwist& twist) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  return {c * twist.vx - s * twist.vy, s * twist.vx + c * twist.vy, twist.wz};
}

WorldVelocity pose_rate(const Pose2& pose, const WheelRates& rates, const RobotGeometry& geom) {
  return adjoint_to_world(pose, wheel_to_twist(rates, geom));
}

namespace {

// Unwrapped state arithmetic; wrapping happens once at the end of a step.
Eigen::Vector3d rate_at(const Eigen::Vector3d& x, const BodyTwist& tw) {
  const double c = std::cos(x.z());
  const double s = std::sin(x.z());
  return {c * tw.vx - s * tw.vy, s * tw.vx + c * tw.vy, tw.wz};
}

}  // namespace

Pose2 integrate(const Pose2& pose, const WheelRates& rates, const RobotGeometry& geom, double dt,
                Integrator scheme) {
  const BodyTwist tw = wheel_to_twist(rates, geom);
  const Eigen::Vector3d x = pose.vec();
  Eigen::Vector3d next;
  if (scheme == Integrator::Euler) {
    next = x + dt * rate_at(x, tw);
  } else {
    const Eigen::Vector3d k1 = rate_at(x, tw);
    const Eigen::Vector3d k2 = rate_at(x + 0.5 * dt * k1, tw);
    const Eigen::Vector3d k3 = rate_at(x + 0.5 * dt * k2, tw);
    const Eigen::Vector3d k4 = rate_at(x + dt * k3, tw);
    next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return Pose2::from_vec(next);
}

Eigen::Matrix3d to_matrix(const Pose2& pose) {
  Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  g(0, 0) = c;
  g(0, 1) = -s;
  g(1, 0) = s;
  g(1, 1) = c;
  g(0, 2) = pose.x;
  g(1, 2) = pose.y;
  return g;
}

Pose2 from_matrix(const Eigen::Matrix3d& g) {
  return {g(0, 2), g(1, 2), wrap_angle(std::atan2(g(1, 0), g(0, 0)))};
}

Pose2 compose(const Pose2& a, const Pose2& b) { return from_matrix(to_matrix(a) * to_matrix(b)); }

}  // namespace lsmr
