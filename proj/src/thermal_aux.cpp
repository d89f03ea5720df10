#include "lel/thermal_aux.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lel/errors.h"

namespace lel {

namespace {

using cd = std::complex<double>;

constexpr double kTimerTol = 1e-9;

double sync_speed() { return 2.0 * std::numbers::pi * kNominalFrequencyHz; }

// Steady-state operating point of the third-order model at slip s and terminal
// voltage v (complex). The rotor equations at rest reduce to
// E' (1 + j s w T0') = j (X - X') I.
struct SteadyPoint {
  cd current;
  cd emf;
  double p = 0.0;
  double t_elec = 0.0;
};

SteadyPoint steady_point(double s, cd v, const CoolingParams& pr) {
  const double xp = pr.x_transient();
  const cd rotor = cd(1.0, s * sync_speed() * pr.t0_transient());
  const cd z = cd(pr.r_s, xp) + cd(0.0, pr.x_open() - xp) / rotor;
  SteadyPoint sp;
  sp.current = v / z;
  sp.emf = cd(0.0, pr.x_open() - xp) * sp.current / rotor;
  sp.p = std::real(v * std::conj(sp.current));
  sp.t_elec = std::real(sp.emf * std::conj(sp.current));
  return sp;
}

// Slip of maximum electrical torque, by golden-section search on (0, 1].
double pullout_slip(double v_mag, const CoolingParams& pr) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 1e-9;
  double b = 1.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  auto torque = [&](double s) { return steady_point(s, cd(v_mag, 0.0), pr).t_elec; };
  double fc = torque(c);
  double fd = torque(d);
  for (int it = 0; it < 200 && (b - a) > 1e-14; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = torque(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = torque(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

void CoolingParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("cooling: " + what); };
  if (!(r_s > 0 && x_s > 0 && x_m > 0 && r_r > 0 && x_r > 0)) fail("all impedances must be > 0");
  if (!(h_m > 0)) fail("h_m must be > 0");
  if (!(v_stall > 0 && v_stall < 1)) fail("v_stall must lie in (0,1)");
  if (!(tau_stall >= 0)) fail("tau_stall must be >= 0");
  if (!(t_cool >= 0)) fail("t_cool must be >= 0");
  if (!(mva_base > 0)) fail("mva_base must be > 0");
  if (!(load_factor > 0 && load_factor <= 1)) fail("load_factor must lie in (0,1]");
}

double CoolingParams::x_transient() const { return x_s + x_m * x_r / (x_m + x_r); }

double CoolingParams::t0_transient() const { return (x_r + x_m) / (sync_speed() * r_r); }

cd motor_current(const MotorState& state, double v_ds, double v_qs, const CoolingParams& params) {
  if (state.mode != MotorMode::Running) return {0.0, 0.0};
  const cd v(v_ds, v_qs);
  const cd e(state.ed_p, state.eq_p);
  return (v - e) / cd(params.r_s, params.x_transient());
}

MotorDerivatives motor_derivatives(const MotorState& state, double v_ds, double v_qs,
                                   const CoolingParams& params) {
  if (!(params.x_m + params.x_r != 0.0))
    throw ValidationError("motor_derivatives: degenerate rotor circuit (X_m + X_r = 0)");
  MotorDerivatives d;
  if (state.mode != MotorMode::Running) return d;

  const cd i = motor_current(state, v_ds, v_qs, params);
  const double w = sync_speed();
  const double dx = params.x_open() - params.x_transient();
  const double t0 = params.t0_transient();
  d.i_ds = i.real();
  d.i_qs = i.imag();
  d.ded_p = w * state.slip * state.eq_p - (state.ed_p + dx * d.i_qs) / t0;
  d.deq_p = -w * state.slip * state.ed_p - (state.eq_p - dx * d.i_ds) / t0;
  d.t_elec = state.ed_p * d.i_ds + state.eq_p * d.i_qs;
  d.dslip = (state.t_mech - d.t_elec) / (2.0 * params.h_m);
  return d;
}

PowerPQ motor_power(double v_ds, double v_qs, double i_ds, double i_qs) {
  return {v_ds * i_ds + v_qs * i_qs, v_qs * i_ds - v_ds * i_qs};
}

double motor_pullout_power(double v_mag, const CoolingParams& params) {
  params.validate();
  return steady_point(pullout_slip(v_mag, params), cd(v_mag, 0.0), params).p;
}

MotorState motor_init(double p_target, double v_mag, const CoolingParams& params, double v_angle) {
  params.validate();
  if (!(v_mag > 0.0)) throw NoEquilibriumError("motor_init: terminal voltage must be positive");
  const cd v = std::polar(v_mag, v_angle);

  MotorState st;
  st.p_target = p_target;
  double slip = 0.0;
  const double no_load = steady_point(0.0, v, params).p;
  if (p_target > no_load) {
    const double s_max = pullout_slip(v_mag, params);
    if (p_target > steady_point(s_max, v, params).p)
      throw NoEquilibriumError("motor_init: target " + std::to_string(p_target) +
                               " pu exceeds pull-out power at |V| = " + std::to_string(v_mag));
    // Active power rises monotonically with slip on the stable branch.
    double lo = 0.0;
    double hi = s_max;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      (steady_point(mid, v, params).p < p_target ? lo : hi) = mid;
    }
    slip = 0.5 * (lo + hi);
  }
  const SteadyPoint sp = steady_point(slip, v, params);
  st.slip = slip;
  st.ed_p = sp.emf.real();
  st.eq_p = sp.emf.imag();
  st.t_mech = slip > 0.0 ? sp.t_elec : 0.0;
  return st;
}

MotorState stall_update(const MotorState& state, double v_mag, double dt, const CoolingParams& params,
                        double v_angle) {
  MotorState next = state;
  if (next.mode == MotorMode::Running) {
    if (v_mag < params.v_stall) {
      next.stall_timer += dt;
      if (next.stall_timer >= params.tau_stall - kTimerTol) {
        next.mode = MotorMode::StallTripped;
        next.stall_timer = 0.0;
        next.recovery_timer = params.t_cool > 0.0 ? params.t_cool : dt;
      }
    } else {
      next.stall_timer = 0.0;
    }
    return next;
  }

  next.recovery_timer -= dt;
  if (next.recovery_timer > kTimerTol) return next;
  try {
    return motor_init(state.p_target, v_mag, params, v_angle);
  } catch (const NoEquilibriumError&) {
    next.recovery_timer = dt;
    return next;
  }
}

void AuxParams::validate() const {
  if (!(p_aux0 >= 0.0)) throw ValidationError("aux: p_aux0 must be >= 0");
  if (std::abs(alpha_z + alpha_i + alpha_p - 1.0) > 1e-9)
    throw ValidationError("aux: alpha_z + alpha_i + alpha_p must equal 1");
  if (!(v0 > 0.0)) throw ValidationError("aux: v0 must be > 0");
}

PowerPQ aux_power(double v_mag, const AuxParams& params) {
  if (!(params.v0 > 0.0)) throw ValidationError("aux_power: V0 must be > 0");
  if (!(v_mag >= 0.0)) throw ValidationError("aux_power: v_mag must be >= 0");
  const double r = v_mag / params.v0;
  const double p = params.p_aux0 * (params.alpha_z * r * r + params.alpha_i * r + params.alpha_p);
  return {p, params.beta_aux * p};
}

MotorState motor_trapezoid_step(const MotorState& state, double v_ds, double v_qs, double dt,
                                const CoolingParams& params) {
  if (state.mode != MotorMode::Running) return state;
  const MotorDerivatives f0 = motor_derivatives(state, v_ds, v_qs, params);
  auto residual = [&](const MotorState& x, double r[3]) {
    const MotorDerivatives f = motor_derivatives(x, v_ds, v_qs, params);
    r[0] = x.ed_p - state.ed_p - 0.5 * dt * (f.ded_p + f0.ded_p);
    r[1] = x.eq_p - state.eq_p - 0.5 * dt * (f.deq_p + f0.deq_p);
    r[2] = x.slip - state.slip - 0.5 * dt * (f.dslip + f0.dslip);
  };
  auto get = [](MotorState& x, int i) -> double& { return i == 0 ? x.ed_p : (i == 1 ? x.eq_p : x.slip); };

  MotorState x = state;
  for (int it = 0; it < 30; ++it) {
    double r[3];
    residual(x, r);
    if (std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])}) < 1e-13) break;
    double jac[3][3];
    for (int j = 0; j < 3; ++j) {
      MotorState xp = x;
      const double h = 1e-7 * std::max(1.0, std::abs(get(xp, j)));
      get(xp, j) += h;
      double rp[3];
      residual(xp, rp);
      for (int i = 0; i < 3; ++i) jac[i][j] = (rp[i] - r[i]) / h;
    }
    // Cramer's rule on the 3x3 system jac * delta = -r.
    auto det3 = [](double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
             m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double det = det3(jac);
    if (det == 0.0) throw NumericalError("motor_trapezoid_step: singular Jacobian");
    for (int j = 0; j < 3; ++j) {
      double m[3][3];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) m[a][b] = (b == j) ? -r[a] : jac[a][b];
      get(x, j) += det3(m) / det;
    }
  }
  x.slip = std::clamp(x.slip, 0.0, 1.0);
  return x;
}

}  // namespace lel
