#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "lel/errors.h"
#include "lel/random.h"
#include "lel/thermal_aux.h"

using namespace lel;
using cd = std::complex<double>;

namespace {

CoolingParams standard_motor() {
  CoolingParams c;
  c.r_s = 0.04;
  c.x_s = 0.10;
  c.x_m = 2.4;
  c.r_r = 0.03;
  c.x_r = 0.08;
  c.h_m = 0.5;
  c.v_stall = 0.65;
  c.tau_stall = 0.05;
  c.t_cool = 2.0;
  c.mva_base = 40.0;
  c.load_factor = 0.75;
  return c;
}

CoolingParams random_motor(Rng& rng) {
  CoolingParams c = standard_motor();
  c.r_s = rng.uniform(0.01, 0.08);
  c.x_s = rng.uniform(0.05, 0.2);
  c.x_m = rng.uniform(1.5, 4.0);
  c.r_r = rng.uniform(0.01, 0.06);
  c.x_r = rng.uniform(0.05, 0.2);
  c.h_m = rng.uniform(0.1, 1.5);
  return c;
}

// Classic T-equivalent circuit, independent of the transient-EMF formulation.
double circuit_power(double slip, double v, const CoolingParams& c) {
  const cd rotor = cd(c.r_r / slip, c.x_r);
  const cd mag = cd(0.0, c.x_m);
  const cd z = cd(c.r_s, c.x_s) + mag * rotor / (mag + rotor);
  return std::real(cd(v, 0) * std::conj(cd(v, 0) / z));
}

double max_abs_derivative(const MotorState& s, cd v, const CoolingParams& c) {
  const MotorDerivatives d = motor_derivatives(s, v.real(), v.imag(), c);
  return std::max({std::abs(d.ded_p), std::abs(d.deq_p), std::abs(d.dslip)});
}

MotorState integrate(MotorState s, cd v, double dt, double horizon, const CoolingParams& c) {
  const int steps = static_cast<int>(std::lround(horizon / dt));
  for (int k = 0; k < steps; ++k) s = motor_trapezoid_step(s, v.real(), v.imag(), dt, c);
  return s;
}

}  // namespace

TEST_CASE("motor power substitution") {
  const PowerPQ zero = motor_power(0, 0, 0, 0);
  CHECK(zero.p == 0.0);
  CHECK(zero.q == 0.0);
  const PowerPQ pq = motor_power(1.0, 0.0, 0.8, -0.2);
  CHECK(pq.p == doctest::Approx(0.8));
  CHECK(pq.q == doctest::Approx(0.2));
}

TEST_CASE("motor_init yields an equilibrium drawing the target power") {
  const CoolingParams c = standard_motor();
  const MotorState s = motor_init(0.8, 1.0, c);
  CHECK(s.slip > 0.0);
  CHECK(s.slip < 0.1);
  CHECK(max_abs_derivative(s, {1.0, 0.0}, c) < 1e-8);
  const cd i = motor_current(s, 1.0, 0.0, c);
  CHECK(std::abs(motor_power(1.0, 0.0, i.real(), i.imag()).p - 0.8) < 1e-9);
  // The T-equivalent circuit at the same slip draws the same power.
  CHECK(std::abs(circuit_power(s.slip, 1.0, c) - 0.8) < 1e-9);
}

TEST_CASE("motor_init respects the terminal voltage angle") {
  const CoolingParams c = standard_motor();
  const cd v = std::polar(0.97, -0.4);
  const MotorState s = motor_init(0.7, 0.97, c, -0.4);
  CHECK(max_abs_derivative(s, v, c) < 1e-8);
  const cd i = motor_current(s, v.real(), v.imag(), c);
  CHECK(std::abs(motor_power(v.real(), v.imag(), i.real(), i.imag()).p - 0.7) < 1e-9);
}

TEST_CASE("unloaded machine and pull-out limit") {
  const CoolingParams c = standard_motor();
  const MotorState idle = motor_init(0.0, 1.0, c);
  CHECK(std::abs(idle.slip) < 1e-12);
  CHECK(idle.t_mech == 0.0);
  CHECK(max_abs_derivative(idle, {1.0, 0.0}, c) < 1e-8);

  const double pmax = motor_pullout_power(1.0, c);
  CHECK(pmax > 1.0);
  CHECK_NOTHROW(motor_init(0.99 * pmax, 1.0, c));
  CHECK_THROWS_AS(motor_init(1.01 * pmax, 1.0, c), NoEquilibriumError);
  // Pull-out power scales with V^2.
  CHECK(motor_pullout_power(0.5, c) == doctest::Approx(0.25 * pmax).epsilon(1e-6));
}

TEST_CASE("no supply: torque collapses and slip rises") {
  const CoolingParams c = standard_motor();
  const MotorState s = motor_init(0.75, 1.0, c);
  // Right after the supply is lost the stator resistance brakes; the torque then
  // dies out with the rotor flux.
  const MotorDerivatives d0 = motor_derivatives(s, 0.0, 0.0, c);
  CHECK(d0.t_elec <= 0.0);
  CHECK(d0.dslip > 0.0);
  const MotorState later = integrate(s, {0.0, 0.0}, 0.001, 2.0, c);
  const MotorDerivatives d = motor_derivatives(later, 0.0, 0.0, c);
  CHECK(std::abs(d.t_elec) < 1e-3 * s.t_mech);
  CHECK(d.dslip > 0.0);
  CHECK(later.slip > s.slip);
}

TEST_CASE("trapezoidal motor integration converges at second order") {
  const CoolingParams c = standard_motor();
  const MotorState s0 = motor_init(0.75, 1.0, c);
  const cd sag(0.85, 0.05);
  const double dt = 0.01;
  const MotorState a = integrate(s0, sag, dt, 1.0, c);
  const MotorState b = integrate(s0, sag, dt / 2, 1.0, c);
  const MotorState r = integrate(s0, sag, dt / 4, 1.0, c);
  auto dist = [](const MotorState& x, const MotorState& y) {
    return std::max({std::abs(x.ed_p - y.ed_p), std::abs(x.eq_p - y.eq_p), std::abs(x.slip - y.slip)});
  };
  const double ratio = dist(a, b) / dist(b, r);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("steady state holds for random motors") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const CoolingParams c = random_motor(rng);
    const double v = rng.uniform(0.95, 1.05);
    const double p = rng.uniform(0.2, 0.8) * motor_pullout_power(v, c);
    const MotorState s0 = motor_init(p, v, c);
    const MotorState s = integrate(s0, {v, 0.0}, 0.002, 5.0, c);
    CHECK(std::abs(s.slip - s0.slip) < 1e-6);
  }
}

TEST_CASE("stall timing examples") {
  const CoolingParams c = standard_motor();
  const double dt = 0.01;
  MotorState s = motor_init(0.75, 1.0, c);
  for (int k = 0; k < 100; ++k) {
    s = stall_update(s, c.v_stall + 0.001 * k, dt, c);
    CHECK(s.mode == MotorMode::Running);
    CHECK(s.stall_timer == 0.0);
  }

  // Sag held for tau_stall + dt trips; a shorter sag does not.
  MotorState held = motor_init(0.75, 1.0, c);
  const int n_trip = static_cast<int>(std::lround(c.tau_stall / dt)) + 1;
  for (int k = 0; k < n_trip; ++k) held = stall_update(held, c.v_stall - 0.05, dt, c);
  CHECK(held.mode == MotorMode::StallTripped);
  CHECK(held.recovery_timer == doctest::Approx(c.t_cool - dt));

  MotorState brief = motor_init(0.75, 1.0, c);
  for (int k = 0; k < n_trip - 2; ++k) brief = stall_update(brief, c.v_stall - 0.05, dt, c);
  brief = stall_update(brief, 1.0, dt, c);
  CHECK(brief.mode == MotorMode::Running);
  CHECK(brief.stall_timer == 0.0);
}

TEST_CASE("stall trips iff a low-voltage run reaches tau_stall (interval-scanning oracle)") {
  CoolingParams c = standard_motor();
  c.tau_stall = 0.05;
  c.t_cool = 1e6;  // stay tripped: only the first trip is compared
  const double dt = 0.01;
  const int need = 5;
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(60);
    const double p_low = rng.uniform(0.1, 0.9);
    for (double& x : v) x = rng.uniform() < p_low ? c.v_stall - 0.1 : 1.0;

    int expected = -1;
    int run = 0;
    for (int k = 0; k < static_cast<int>(v.size()) && expected < 0; ++k) {
      run = v[k] < c.v_stall ? run + 1 : 0;
      if (run >= need) expected = k;
    }

    MotorState s = motor_init(0.75, 1.0, c);
    int tripped_at = -1;
    for (int k = 0; k < static_cast<int>(v.size()); ++k) {
      s = stall_update(s, v[k], dt, c);
      if (tripped_at < 0 && s.mode == MotorMode::StallTripped) tripped_at = k;
    }
    CHECK(tripped_at == expected);
  }
}

TEST_CASE("stall recovery re-enters an equilibrium") {
  CoolingParams c = standard_motor();
  c.t_cool = 0.3;
  const double dt = 0.01;
  MotorState s = motor_init(0.75, 1.0, c);
  for (int k = 0; k < 10 && s.mode == MotorMode::Running; ++k) s = stall_update(s, 0.3, dt, c);
  REQUIRE(s.mode == MotorMode::StallTripped);
  CHECK(motor_current(s, 0.3, 0.0, c) == cd(0.0, 0.0));
  int steps = 0;
  const cd v = std::polar(0.96, 0.2);
  while (s.mode == MotorMode::StallTripped && steps < 1000) {
    s = stall_update(s, std::abs(v), dt, c, std::arg(v));
    ++steps;
  }
  CHECK(steps == 30);
  CHECK(max_abs_derivative(s, v, c) < 1e-6);
}

TEST_CASE("ZIP auxiliary load") {
  AuxParams a{50.0, 0.4, 0.3, 0.3, 0.25, 1.02};
  const PowerPQ ref = aux_power(1.02, a);
  CHECK(ref.p == doctest::Approx(50.0));
  CHECK(ref.q == doctest::Approx(12.5));
  CHECK(aux_power(0.95 * 1.02, a).p == doctest::Approx(0.946 * 50.0));
  AuxParams z{50.0, 1.0, 0.0, 0.0, 0.0, 1.0};
  CHECK(aux_power(0.9, z).p == doctest::Approx(0.81 * 50.0));
  a.v0 = 0.0;
  CHECK_THROWS_AS(aux_power(1.0, a), ValidationError);

  AuxParams bad{50.0, 0.5, 0.3, 0.3, 0.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  AuxParams near{50.0, 0.4, 0.3, 0.3 + 5e-10, 0.0, 1.0};
  CHECK_NOTHROW(near.validate());
}

TEST_CASE("cooling parameter validation") {
  CoolingParams c = standard_motor();
  CHECK_NOTHROW(c.validate());
  c.x_m = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = standard_motor();
  c.v_stall = 1.2;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
