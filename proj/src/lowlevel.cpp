#include "lsmr/lowlevel.hpp"

#include <cmath>

namespace lsmr {

void RsdnnGains::validate() const {
  if (!(epsilon > 0.0) || !(gamma > 0.0) || !(delta > 0.0) || !(chi0 > 0.0)) {
    throw std::invalid_argument("RSDNN gains must be strictly positive");
  }
}

double barrier_value(double E, double O) {
  if (!(O > 0.0)) throw std::invalid_argument("barrier bound must be positive");
  if (!(E < O)) throw BarrierFault("pose error reached the safety bound");
  const double l = std::log(O / (O - std::max(E, 0.0)));
  return l * l;
}

double pose_error(const Pose2& msr, const Pose2& ref) {
  return pose_error(msr, ref, Eigen::Vector3d::Ones());
}

double pose_error(const Pose2& msr, const Pose2& ref, const Eigen::Vector3d& weights) {
  const double dx = msr.x - ref.x;
  const double dy = msr.y - ref.y;
  const double dyaw = wrap_angle(msr.yaw - ref.yaw);
  return std::sqrt(weights[0] * dx * dx + weights[1] * dy * dy + weights[2] * dyaw * dyaw);
}

ControlTerms control(double rate_ref, double rate_msr, const BarrierState& barrier, const AdaptiveState& adapt,
                     const RsdnnGains& gains, double u_sdnn) {
  ControlTerms t;
  const double e = rate_msr - rate_ref;
  t.barrier = barrier.value();
  t.u_sdnn = u_sdnn;
  t.u_prop = -0.5 * gains.epsilon * e;
  t.u_barrier = -gains.gamma * e * t.barrier * adapt.chi;
  t.u_total = t.u_sdnn + t.u_prop + t.u_barrier;
  if (!std::isfinite(t.u_total)) throw NumericalFault("non-finite control signal");
  return t;
}

ControlTerms control(Side side, double rate_ref, double rate_msr, const BarrierState& barrier,
                     const AdaptiveState& adapt, const RsdnnGains& gains, const SdnnModel& model) {
  return control(rate_ref, rate_msr, barrier, adapt, gains, model.u_for_rate(side, rate_ref));
}

AdaptiveState adapt_step(const AdaptiveState& adapt, const BarrierState& barrier, const RsdnnGains& gains,
                         double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("adapt_step: dt must be positive");
  const double drive = gains.gamma * adapt.e * adapt.e * barrier.value();
  if (!std::isfinite(drive) || !std::isfinite(adapt.chi)) throw NumericalFault("non-finite adaptation drive");
  AdaptiveState next = adapt;
  next.chi = adapt.chi + dt * (-gains.delta * adapt.chi + drive);
  if (next.chi < 0.0) {
    next.chi = 0.0;
    next.clamped = true;
  }
  return next;
}

}  // namespace lsmr
