#pragma once

#include <Eigen/Core>

namespace lsmr {

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Planar pose on SE(2). Yaw is kept in (-pi, pi] by every operation in this header.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Eigen::Vector3d vec() const { return {x, y, yaw}; }
  static Pose2 from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), wrap_angle(v.z())}; }
};

/// Body-frame twist (v_x, v_y, omega_z).
struct BodyTwist {
  double vx = 0.0;
  double vy = 0.0;
  double wz = 0.0;
};

/// World-frame pose rate (x_dot, y_dot, yaw_dot).
using WorldVelocity = Eigen::Vector3d;

/// Per-side wheel angular velocities, rad/s.
struct WheelRates {
  double right = 0.0;
  double left = 0.0;

  Eigen::Vector2d vec() const { return {right, left}; }
  static WheelRates from_vec(const Eigen::Vector2d& v) { return {v[0], v[1]}; }
};

struct RobotGeometry {
  double wheel_radius = 1.0;  // r, m
  double half_track = 1.0;    // c, m

  bool valid() const { return wheel_radius > 0.0 && half_track > 0.0; }
  /// The 3x2 skid-steer Jacobian mapping (theta_dot_R, theta_dot_L) to the body twist.
  Eigen::Matrix<double, 3, 2> jacobian() const;
};

enum class Integrator { Euler, RK4 };

BodyTwist wheel_to_twist(const WheelRates& rates, const RobotGeometry& geom);

/// Inverse of wheel_to_twist for twists with v_y = 0.
WheelRates twist_to_wheel(double vx, double wz, const RobotGeometry& geom);

/// Carries a body twist to the world frame at `pose`: [R(yaw) (vx, vy), wz].
WorldVelocity adjoint_to_world(const Pose2& pose, const BodyTwist& twist);

/// Velocity-level kinematic model x_dot = Ad_G J theta_dot.
WorldVelocity pose_rate(const Pose2& pose, const WheelRates& rates, const RobotGeometry& geom);

/// Advances `pose` for `dt` seconds with constant wheel rates.
Pose2 integrate(const Pose2& pose, const WheelRates& rates, const RobotGeometry& geom, double dt,
                Integrator scheme = Integrator::RK4);

/// Homogeneous transform of a pose.
Eigen::Matrix3d to_matrix(const Pose2& pose);
Pose2 from_matrix(const Eigen::Matrix3d& g);
Pose2 compose(const Pose2& a, const Pose2& b);

}  // namespace lsmr
