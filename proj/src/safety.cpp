#include "lsmr/safety.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsmr {

std::string_view to_string(SafetyState s) {
  switch (s) {
    case SafetyState::Running: return "Running";
    case SafetyState::Braking: return "Braking";
    case SafetyState::SafeStop: return "SafeStop";
  }
  return "?";
}

std::string_view to_string(LatchReason r) {
  switch (r) {
    case LatchReason::None: return "None";
    case LatchReason::BarrierExceeded: return "BarrierExceeded";
    case LatchReason::EStop: return "EStop";
    case LatchReason::NumericalFault: return "NumericalFault";
  }
  return "?";
}

void SafetyConfig::validate() const {
  if (!(bound > 0.0) || !(margin > 0.0 && margin < 1.0) || !(taper_start > 0.0 && taper_start < margin) ||
      !(cap_floor > 0.0 && cap_floor <= 1.0) || !(brake_decel > 0.0) ||
      !(recover_fraction > 0.0 && recover_fraction < margin)) {
    throw std::invalid_argument("invalid safety configuration");
  }
}

double cap_factor(double E, const SafetyConfig& cfg) {
  const double lo = cfg.taper_start * cfg.bound;
  const double hi = cfg.margin * cfg.bound;
  if (E <= lo) return 1.0;
  if (E >= hi) return cfg.cap_floor;
  return 1.0 - (1.0 - cfg.cap_floor) * (E - lo) / (hi - lo);
}

SafetyStatus monitor(double E, bool estop, bool fault, const SafetyStatus& status, const SafetyConfig& cfg) {
  SafetyStatus next = status;
  next.E = E;
  if (status.state == SafetyState::SafeStop) return next;
  const bool bad_value = !std::isfinite(E);
  if (estop || fault || bad_value) {
    next.state = SafetyState::SafeStop;
    next.reason = estop ? LatchReason::EStop : LatchReason::NumericalFault;
    next.cap_factor = 0.0;
    return next;
  }
  if (E >= cfg.bound) {
    next.state = SafetyState::SafeStop;
    next.reason = LatchReason::BarrierExceeded;
    next.cap_factor = 0.0;
    return next;
  }
  switch (status.state) {
    case SafetyState::Running:
      if (E >= cfg.margin * cfg.bound) {
        next.state = SafetyState::Braking;
        next.stopped = false;
      }
      break;
    case SafetyState::Braking:
      if (E < cfg.recover_fraction * cfg.bound && !status.stopped) {
        next.state = SafetyState::Running;
      } else if (status.stopped && E >= cfg.margin * cfg.bound) {
        next.state = SafetyState::SafeStop;
        next.reason = LatchReason::BarrierExceeded;
      }
      break;
    case SafetyState::SafeStop:
      break;
  }
  next.cap_factor = next.state == SafetyState::Running ? cap_factor(E, cfg) : 0.0;
  return next;
}

std::optional<double> guard_barrier(double E, double O, double eta) {
  if (!std::isfinite(E) || !(E < eta * O)) return std::nullopt;
  const double l = std::log(O / (O - std::max(E, 0.0)));
  return l * l;
}

WheelRates shape_command(const WheelRates& cmd, const SafetyStatus& status, const WheelRates& previous, double dt,
                         const SafetyConfig& cfg) {
  switch (status.state) {
    case SafetyState::Running: {
      if (!std::isfinite(cmd.right) || !std::isfinite(cmd.left)) return {0.0, 0.0};
      return {cmd.right * status.cap_factor, cmd.left * status.cap_factor};
    }
    case SafetyState::Braking: {
      const double step = cfg.brake_decel * dt;
      auto toward_zero = [step](double v) {
        if (!std::isfinite(v)) return 0.0;
        return v > 0.0 ? std::max(v - step, 0.0) : std::min(v + step, 0.0);
      };
      return {toward_zero(previous.right), toward_zero(previous.left)};
    }
    case SafetyState::SafeStop:
      return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

Supervisor::Supervisor(SafetyConfig cfg) : cfg_(cfg) { cfg_.validate(); }

const SafetyStatus& Supervisor::monitor(double E, bool estop, bool fault) {
  status_ = lsmr::monitor(E, estop, fault, status_, cfg_);
  return status_;
}

WheelRates Supervisor::shape(const WheelRates& cmd, double dt) {
  last_ = shape_command(cmd, status_, last_, dt, cfg_);
  if (status_.state == SafetyState::Braking && last_.right == 0.0 && last_.left == 0.0) status_.stopped = true;
  return last_;
}

void Supervisor::reset() {
  status_ = SafetyStatus{};
  last_ = {};
}

}  // namespace lsmr
