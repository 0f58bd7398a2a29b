#pragma once

#include "lsmr/nmpc.hpp"
#include "lsmr/se2.hpp"

namespace lsmr {

/// Gerono figure-eight x = cx + (L/2) sin(phi), y = cy + (W/2) sin(2 phi), phi = 2 pi t / T.
struct LemniscateParams {
  double length = 19.0;
  double width = 10.0;
  double period = 120.0;
  double center_x = 9.5;
  double center_y = 5.0;

  void validate() const;
};

/// Pose with heading tangent to the path, and its analytic time derivative.
RefSample lemniscate_reference(const LemniscateParams& p, double t);

/// Wheel rates that realise the reference twist exactly (v_y = 0).
WheelRates reference_wheel_rates(const LemniscateParams& p, double t, const RobotGeometry& geom);

}  // namespace lsmr
