#pragma once

#include <optional>
#include <string_view>

#include "lsmr/se2.hpp"

namespace lsmr {

enum class SafetyState { Running, Braking, SafeStop };
enum class LatchReason { None, BarrierExceeded, EStop, NumericalFault };

std::string_view to_string(SafetyState s);
std::string_view to_string(LatchReason r);

struct SafetyConfig {
  double bound = 0.4;             // O
  double margin = 0.95;           // eta
  double taper_start = 0.8;       // fraction of O where the speed cap begins
  double cap_floor = 0.25;        // cap factor reached at eta * O
  double brake_decel = 0.2;       // rad/s^2
  double recover_fraction = 0.5;  // Braking -> Running below this fraction of O

  void validate() const;
};

struct SafetyStatus {
  SafetyState state = SafetyState::Running;
  double E = 0.0;
  LatchReason reason = LatchReason::None;
  double cap_factor = 1.0;
  bool stopped = false;  // braking profile has reached zero
};

/// Speed cap: 1 below taper_start * O, linear down to cap_floor at eta * O.
double cap_factor(double E, const SafetyConfig& cfg);

/// One supervisor transition for the held pose error E.
SafetyStatus monitor(double E, bool estop, bool fault, const SafetyStatus& status, const SafetyConfig& cfg);

/// log^2(O / (O - E)) when E < eta * O, otherwise nullopt (the supervisor owns that region).
std::optional<double> guard_barrier(double E, double O, double eta = 0.95);

/// Applies the cap, the braking ramp (from the previous shaped output) or the SafeStop zero.
WheelRates shape_command(const WheelRates& cmd, const SafetyStatus& status, const WheelRates& previous, double dt,
                         const SafetyConfig& cfg);

/// Owns the state machine and the last shaped command for one control loop.
class Supervisor {
 public:
  explicit Supervisor(SafetyConfig cfg = {});

  const SafetyStatus& monitor(double E, bool estop, bool fault);
  WheelRates shape(const WheelRates& cmd, double dt);
  /// Explicit operator reset; the only way out of SafeStop.
  void reset();

  const SafetyStatus& status() const { return status_; }
  const SafetyConfig& config() const { return cfg_; }
  const WheelRates& last_output() const { return last_; }

 private:
  SafetyConfig cfg_;
  SafetyStatus status_;
  WheelRates last_;
};

}  // namespace lsmr
