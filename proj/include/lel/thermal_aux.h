#pragma once

#include <complex>

namespace lel {

inline constexpr double kNominalFrequencyHz = 60.0;

// Single-cage induction motor behind a transient impedance, per-unit on mva_base.
struct CoolingParams {
  double r_s = 0.0;
  double x_s = 0.0;
  double x_m = 0.0;
  double r_r = 0.0;
  double x_r = 0.0;
  double h_m = 0.0;        // s
  double v_stall = 0.0;    // pu
  double tau_stall = 0.0;  // s
  double t_cool = 0.0;     // s
  double mva_base = 1.0;   // MVA
  double load_factor = 1.0;

  void validate() const;

  double x_open() const { return x_s + x_m; }
  double x_transient() const;
  // Rotor open-circuit time constant in seconds.
  double t0_transient() const;
};

enum class MotorMode { Running, StallTripped };

struct MotorState {
  double ed_p = 0.0;
  double eq_p = 0.0;
  double slip = 0.0;
  double stall_timer = 0.0;
  MotorMode mode = MotorMode::Running;
  double recovery_timer = 0.0;
  // Constant mechanical torque and the active-power target it was sized for,
  // both fixed by motor_init.
  double t_mech = 0.0;
  double p_target = 0.0;
};

struct MotorDerivatives {
  double ded_p = 0.0;
  double deq_p = 0.0;
  double dslip = 0.0;
  double i_ds = 0.0;
  double i_qs = 0.0;
  double t_elec = 0.0;
};

struct PowerPQ {
  double p = 0.0;
  double q = 0.0;
};

// Stator current drawn by the motor, (v - e') / (R_s + j X').
std::complex<double> motor_current(const MotorState& state, double v_ds, double v_qs,
                                   const CoolingParams& params);

MotorDerivatives motor_derivatives(const MotorState& state, double v_ds, double v_qs,
                                   const CoolingParams& params);

// q > 0 means the load absorbs reactive power.
PowerPQ motor_power(double v_ds, double v_qs, double i_ds, double i_qs);

// Stall timing and trip/reconnect. On reconnection the motor is re-initialized at
// the terminal voltage (v_mag at angle v_angle); if that loading has no
// equilibrium the block stays disconnected and retries next step.
MotorState stall_update(const MotorState& state, double v_mag, double dt, const CoolingParams& params,
                        double v_angle = 0.0);

// Steady state drawing p_target (pu on mva_base) at terminal voltage v_mag∠v_angle.
// Throws NoEquilibriumError above pull-out. Targets at or below the no-load loss
// return the unloaded machine (slip 0, zero mechanical torque).
MotorState motor_init(double p_target, double v_mag, const CoolingParams& params,
                      double v_angle = 0.0);

// Largest active power (pu) the motor can draw on the stable branch at v_mag.
double motor_pullout_power(double v_mag, const CoolingParams& params);

struct AuxParams {
  double p_aux0 = 0.0;  // MW at V0
  double alpha_z = 0.0;
  double alpha_i = 0.0;
  double alpha_p = 1.0;
  double beta_aux = 0.0;  // Q/P
  double v0 = 1.0;        // pu

  void validate() const;
};

// ZIP load in MW / MVAr.
PowerPQ aux_power(double v_mag, const AuxParams& params);

// One implicit-trapezoidal step of the motor at fixed terminal voltage; slip is
// kept inside [0, 1]. A disconnected motor is returned unchanged.
MotorState motor_trapezoid_step(const MotorState& state, double v_ds, double v_qs, double dt,
                                const CoolingParams& params);

}  // namespace lel
