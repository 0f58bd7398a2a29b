#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>

#include "lsmr/plant.hpp"
#include "lsmr/sdnn_model.hpp"
#include "lsmr/se2.hpp"

namespace lsmr {

/// Raised when the barrier is evaluated at or beyond its bound; the supervisor must handle it.
struct BarrierFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for non-finite control or adaptation values.
struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RsdnnGains {
  double epsilon = 40.0;  // proportional weight
  double gamma = 5.0;     // barrier-feedback weight
  double delta = 1.0;     // adaptation leak
  double chi0 = 0.1;      // initial adaptive gain

  void validate() const;
};

/// log^2(O / (O - E)). Throws BarrierFault when E >= O.
double barrier_value(double E, double O);

struct BarrierState {
  double E = 0.0;
  double O = 0.4;

  double value() const { return barrier_value(E, O); }
};

/// Norm of (dx, dy, wrapped dyaw). Optional per-component weights give a weighted norm.
double pose_error(const Pose2& msr, const Pose2& ref);
double pose_error(const Pose2& msr, const Pose2& ref, const Eigen::Vector3d& weights);

struct AdaptiveState {
  double chi = 0.1;
  double e = 0.0;          // measured minus reference wheel rate, rad/s
  bool clamped = false;    // set when rounding pushed chi below zero
};

struct ControlTerms {
  double u_sdnn = 0.0;
  double u_prop = 0.0;
  double u_barrier = 0.0;
  double barrier = 0.0;
  double u_total = 0.0;
};

/// u = u_sdnn - eps/2 e - gamma e log^2(O/(O-E)) chi, with e = rate_msr - rate_ref.
ControlTerms control(double rate_ref, double rate_msr, const BarrierState& barrier, const AdaptiveState& adapt,
                     const RsdnnGains& gains, double u_sdnn);
ControlTerms control(Side side, double rate_ref, double rate_msr, const BarrierState& barrier,
                     const AdaptiveState& adapt, const RsdnnGains& gains, const SdnnModel& model);

/// Explicit Euler step of chi_dot = -delta chi + gamma e^2 log^2(O/(O-E)).
AdaptiveState adapt_step(const AdaptiveState& adapt, const BarrierState& barrier, const RsdnnGains& gains, double dt);

}  // namespace lsmr
