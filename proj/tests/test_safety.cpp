#include <cmath>

#include "doctest.h"
#include "lsmr/safety.hpp"

using namespace lsmr;
using doctest::Approx;

TEST_CASE("monitor examples") {
  const SafetyConfig cfg;
  SafetyStatus s;
  s = monitor(0.1, false, false, s, cfg);
  CHECK(s.state == SafetyState::Running);
  s = monitor(0.4, false, false, SafetyStatus{}, cfg);
  CHECK(s.state == SafetyState::SafeStop);
  CHECK(s.reason == LatchReason::BarrierExceeded);

  for (SafetyState start : {SafetyState::Running, SafetyState::Braking}) {
    SafetyStatus st;
    st.state = start;
    st = monitor(0.1, true, false, st, cfg);
    CHECK(st.state == SafetyState::SafeStop);
    CHECK(st.reason == LatchReason::EStop);
    for (int i = 0; i < 10; ++i) st = monitor(0.0, false, false, st, cfg);
    CHECK(st.state == SafetyState::SafeStop);
  }
  s = monitor(0.1, false, true, SafetyStatus{}, cfg);
  CHECK(s.reason == LatchReason::NumericalFault);
  s = monitor(std::nan(""), false, false, SafetyStatus{}, cfg);
  CHECK(s.state == SafetyState::SafeStop);
}

TEST_CASE("Running -> Braking -> Running recovery and Braking -> SafeStop") {
  const SafetyConfig cfg;
  SafetyStatus s;
  s = monitor(0.38, false, false, s, cfg);
  CHECK(s.state == SafetyState::Braking);
  s = monitor(0.3, false, false, s, cfg);
  CHECK(s.state == SafetyState::Braking);
  s = monitor(0.19, false, false, s, cfg);
  CHECK(s.state == SafetyState::Running);

  s = monitor(0.39, false, false, s, cfg);
  CHECK(s.state == SafetyState::Braking);
  s = monitor(0.4, false, false, s, cfg);
  CHECK(s.state == SafetyState::SafeStop);
  CHECK(s.reason == LatchReason::BarrierExceeded);
}

TEST_CASE("Braking that reaches zero with E still high latches SafeStop") {
  Supervisor sup;
  sup.monitor(0.1, false, false);
  sup.shape({0.02, 0.01}, 1e-3);
  sup.monitor(0.385, false, false);
  REQUIRE(sup.status().state == SafetyState::Braking);
  for (int i = 0; i < 200; ++i) {
    sup.shape({0.5, 0.5}, 1e-3);
    sup.monitor(0.385, false, false);
  }
  CHECK(sup.status().state == SafetyState::SafeStop);
  CHECK(sup.last_output().right == 0.0);
}

TEST_CASE("shape_command") {
  const SafetyConfig cfg;
  SafetyStatus s;
  s = monitor(0.0, false, false, s, cfg);
  auto out = shape_command({0.6, 0.3}, s, {}, 1e-3, cfg);
  CHECK(out.right == 0.6);
  CHECK(out.left == 0.3);

  // Taper: 1 at 0.32, 0.25 at 0.38, linear in between.
  CHECK(cap_factor(0.32, cfg) == Approx(1.0));
  CHECK(cap_factor(0.35, cfg) == Approx(0.625));
  CHECK(cap_factor(0.38, cfg) == Approx(0.25));
  s = monitor(0.35, false, false, SafetyStatus{}, cfg);
  out = shape_command({0.8, 0.4}, s, {}, 1e-3, cfg);
  CHECK(out.right == Approx(0.5));
  CHECK(out.left == Approx(0.25));

  SafetyStatus stop;
  stop.state = SafetyState::SafeStop;
  out = shape_command({0.8, 0.4}, stop, {0.3, 0.3}, 1e-3, cfg);
  CHECK(out.right == 0.0);
  CHECK(out.left == 0.0);
  out = shape_command({NAN, 0.4}, SafetyStatus{}, {}, 1e-3, cfg);
  CHECK(out.right == 0.0);
}

TEST_CASE("braking ramp from 0.8 reaches zero after 4 s, linearly and monotonically") {
  Supervisor sup;
  sup.monitor(0.0, false, false);
  sup.shape({0.8, 0.8}, 1e-3);
  sup.monitor(0.385, false, false);
  REQUIRE(sup.status().state == SafetyState::Braking);
  double prev = 0.8;
  int k = 0;
  while (sup.last_output().right > 0.0 && k < 10000) {
    ++k;
    const WheelRates out = sup.shape({0.8, 0.8}, 1e-3);
    CHECK(out.right <= prev);
    CHECK(out.right == Approx(std::max(0.8 - 0.2 * k * 1e-3, 0.0)).epsilon(1e-9));
    prev = out.right;
    sup.monitor(0.3, false, false);  // between recovery and margin: keep braking
  }
  // 0.8 / 0.2 = 4 s; repeated subtraction may leave one ulp-sized remainder for an extra tick.
  CHECK(k >= 4000);
  CHECK(k <= 4001);
}

TEST_CASE("guard_barrier") {
  CHECK(*guard_barrier(0.0, 0.4) == 0.0);
  CHECK(*guard_barrier(0.2, 0.4) == Approx(0.4804530139182014));
  CHECK_FALSE(guard_barrier(0.95 * 0.4, 0.4));
  CHECK_FALSE(guard_barrier(0.5, 0.4));
  CHECK_FALSE(guard_barrier(std::nan(""), 0.4));
}

TEST_CASE("operator reset is the only exit from SafeStop") {
  Supervisor sup;
  sup.monitor(0.0, true, false);
  CHECK(sup.status().state == SafetyState::SafeStop);
  for (int i = 0; i < 100; ++i) sup.monitor(0.0, i % 2 == 0, false);
  CHECK(sup.status().state == SafetyState::SafeStop);
  sup.reset();
  CHECK(sup.status().state == SafetyState::Running);
}

TEST_CASE("identical inputs give identical transitions") {
  auto run = [] {
    Supervisor sup;
    std::vector<int> trace;
    for (int k = 0; k < 3000; ++k) {
      const double E = 0.2 + 0.19 * std::sin(k * 0.004);
      sup.monitor(E, k == 2500, false);
      sup.shape({0.5, 0.4}, 1e-3);
      trace.push_back(static_cast<int>(sup.status().state));
    }
    return trace;
  };
  CHECK(run() == run());
}
