#pragma once

#include <complex>
#include <string>

#include "lel/protection.h"
#include "lel/random.h"
#include "lel/thermal_aux.h"
#include "lel/workload.h"

namespace lel {

enum class Archetype { Datacenter, CryptoMining, Electrolyzer };

const char* to_string(Archetype a);
Archetype archetype_from_string(const std::string& name);

struct LelParams {
  WorkloadParams work;
  CoolingParams cool;
  AuxParams aux;
  ProtectionParams prot;
  Archetype archetype = Archetype::Datacenter;

  void validate() const;
  // Cooling demand at the operating point, MW (the motor runs at load_factor of its rating).
  double cooling_mw() const { return cool.load_factor * cool.mva_base; }
  // p_work(mu_eta) + cooling + p_aux0.
  double nominal_mw() const;
};

struct LelState {
  WorkloadState work;
  MotorState motor;
  ProtectionState prot;
};

// Placeholder parameters: a 100 MW data center, a 50 MW mine and a 200 MW electrolyzer. They exist so that
// uncalibrated runs are possible; facility disclosure and calibration replace them.
LelParams archetype_defaults(Archetype archetype);

struct DemandShares {
  double work = 0.6;
  double cool = 0.3;
  double aux = 0.1;
};

// Rescale params so the facility draws p_total_mw at its operating point, split by
// shares. A positive motor_mva pins the motor rating; otherwise it follows from
// the cooling share and load_factor. Throws NoEquilibriumError if the cooling share
// exceeds a pinned rating.
LelParams allocate_demand(const LelParams& params, double p_total_mw, const DemandShares& shares = {},
                          double motor_mva = 0.0);

// Equilibrium state at terminal voltage v_mag∠v_angle (workload at its mean).
LelState lel_init(const LelParams& params, double v_mag, double v_angle = 0.0);

struct LelDemand {
  double p_load = 0.0;  // MW, before retention
  double q_load = 0.0;  // MVAr
  double p = 0.0;       // MW, after retention
  double q = 0.0;
  double p_work = 0.0;
  double p_cool = 0.0;
  double q_cool = 0.0;
  double p_aux = 0.0;
  double q_aux = 0.0;
};

// Demand of the current state at terminal voltage v (complex pu).
LelDemand lel_demand(const LelState& state, const LelParams& params, std::complex<double> v);

struct LelStepResult {
  LelState state;
  LelDemand demand;
};

// Advance one instance by dt at a fixed terminal voltage: workload, then motor,
// then protection, then retention.
LelStepResult lel_step(const LelState& state, double v_mag, double v_angle, double omega, double dt, Rng& rng,
                       const LelParams& params);

inline constexpr double kLowVoltageFloor = 0.05;

// Current drawn from the bus, conj(S / s_base / V). Throws NumericalError when |V|
// is at or below kLowVoltageFloor; callers switch to constant-admittance behaviour.
std::complex<double> lel_current_injection(double p_mw, double q_mvar, std::complex<double> v, double s_base);

// Parameter-exchange file: the four parameter blocks plus the archetype tag.
std::string serialize_lel_params(const LelParams& params);
LelParams parse_lel_params(const std::string& document);

}  // namespace lel
