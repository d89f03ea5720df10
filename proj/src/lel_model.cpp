#include "lel/lel_model.h"

#include <cmath>

#include "lel/errors.h"
#include "lel/kvtext.h"

namespace lel {

const char* to_string(Archetype a) {
  switch (a) {
    case Archetype::Datacenter: return "DATACENTER";
    case Archetype::CryptoMining: return "CRYPTO_MINING";
    case Archetype::Electrolyzer: return "ELECTROLYZER";
  }
  return "?";
}

Archetype archetype_from_string(const std::string& name) {
  if (name == "DATACENTER") return Archetype::Datacenter;
  if (name == "CRYPTO_MINING") return Archetype::CryptoMining;
  if (name == "ELECTROLYZER") return Archetype::Electrolyzer;
  throw ParseError("unknown archetype '" + name + "'");
}

void LelParams::validate() const {
  work.validate();
  cool.validate();
  aux.validate();
  prot.validate();
  if (!(nominal_mw() > 0.0)) throw ValidationError("lel: nominal demand must be > 0");
}

double LelParams::nominal_mw() const {
  return workload_power(work.mu_eta, work) + cooling_mw() + aux.p_aux0;
}

namespace {

// Workload block with idle draw idle_ratio * p_full, drawing work_mw at mu.
WorkloadParams sized_workload(double work_mw, double mu, double idle_ratio, double tau, double stationary_std,
                              double lambda, double jump, double jump_spread) {
  WorkloadParams w;
  w.mu_eta = mu;
  w.p_full = work_mw / (idle_ratio + mu * (1.0 - idle_ratio));
  w.p_base = idle_ratio * w.p_full;
  w.tau_eta = tau;
  // Stationary OU standard deviation is sigma / sqrt(2 tau).
  w.sigma_xi = stationary_std * std::sqrt(2.0 * tau);
  w.lambda_burst = lambda;
  // Impulses move eta by A / tau.
  w.lnA_mu = std::log(jump * tau);
  w.lnA_sigma = jump_spread;
  return w;
}

CoolingParams cooling_block(double cool_mw, double h, double v_stall, double tau_stall, double t_cool) {
  CoolingParams c;
  c.r_s = 0.04;
  c.x_s = 0.10;
  c.x_m = 2.4;
  c.r_r = 0.03;
  c.x_r = 0.08;
  c.h_m = h;
  c.v_stall = v_stall;
  c.tau_stall = tau_stall;
  c.t_cool = t_cool;
  c.load_factor = 0.75;
  c.mva_base = cool_mw / c.load_factor;
  return c;
}

}  // namespace

LelParams archetype_defaults(Archetype archetype) {
  LelParams p;
  p.archetype = archetype;
  // Facility sizes: 100 MW data center, 50 MW mine, 200 MW electrolyzer, split 60/30/10.
  const double size = archetype == Archetype::Datacenter ? 100.0 : (archetype == Archetype::CryptoMining ? 50.0 : 200.0);
  p.aux = AuxParams{0.1 * size, 0.4, 0.3, 0.3, 0.3, 1.0};
  switch (archetype) {
    case Archetype::Datacenter:
      p.work = sized_workload(0.6 * size, 0.55, 0.35, 30.0, 0.06, 0.005, 0.2, 0.4);
      // Wide voltage band; frequency excursions are filtered for 0.5 s before shedding.
      p.cool = cooling_block(0.3 * size, 0.5, 0.65, 0.3, 5.0);
      p.prot = ProtectionParams{1.0, 1.0, 0.30, 0.006, 0.5, 2.0, 3.0, 0.1, 1.0, 0.2};
      break;
    case Archetype::CryptoMining:
      // High, steady utilization; curtails on frequency and restarts fast.
      p.work = sized_workload(0.6 * size, 0.9, 0.1, 120.0, 0.01, 0.0005, 0.05, 0.3);
      p.cool = cooling_block(0.3 * size, 0.3, 0.6, 0.3, 2.0);
      p.aux.beta_aux = 0.2;
      p.prot = ProtectionParams{1.0, 1.0, 0.25, 0.004, 0.5, 0.5, 1.0, 0.05, 1.0, 0.5};
      break;
    case Archetype::Electrolyzer:
      // Slow utilization dynamics; tight bands behind a long filter delay, slow staged restart.
      p.work = sized_workload(0.6 * size, 0.7, 0.15, 600.0, 0.03, 0.0002, 0.1, 0.3);
      p.cool = cooling_block(0.3 * size, 0.4, 0.7, 0.3, 8.0);
      p.aux.beta_aux = 0.4;
      p.prot = ProtectionParams{1.0, 1.0, 0.20, 0.003, 0.6, 3.0, 5.0, 0.2, 1.0, 0.1};
      break;
  }
  return p;
}

LelParams allocate_demand(const LelParams& params, double p_total_mw, const DemandShares& shares,
                          double motor_mva) {
  if (!(p_total_mw > 0.0)) throw ValidationError("allocate_demand: demand must be > 0");
  if (!(shares.work >= 0 && shares.cool > 0 && shares.aux >= 0) ||
      std::abs(shares.work + shares.cool + shares.aux - 1.0) > 1e-9)
    throw ValidationError("allocate_demand: shares must be non-negative, cooling positive, summing to 1");

  LelParams out = params;
  const double work_now = workload_power(params.work.mu_eta, params.work);
  const double work_target = shares.work * p_total_mw;
  if (work_now > 0.0) {
    const double scale = work_target / work_now;
    out.work.p_base *= scale;
    out.work.p_full *= scale;
  } else {
    out.work.p_base = out.work.p_full = work_target;
  }

  const double cool_mw = shares.cool * p_total_mw;
  if (motor_mva > 0.0) {
    if (cool_mw > motor_mva)
      throw NoEquilibriumError("allocate_demand: cooling share " + std::to_string(cool_mw) +
                               " MW exceeds motor rating " + std::to_string(motor_mva) + " MVA");
    out.cool.mva_base = motor_mva;
    out.cool.load_factor = cool_mw / motor_mva;
  } else {
    out.cool.mva_base = cool_mw / out.cool.load_factor;
  }
  out.aux.p_aux0 = shares.aux * p_total_mw;
  out.validate();
  return out;
}

LelState lel_init(const LelParams& params, double v_mag, double v_angle) {
  LelState s;
  s.work.eta = params.work.mu_eta;
  s.motor = motor_init(params.cool.load_factor, v_mag, params.cool, v_angle);
  s.prot = ProtectionState::initial(params.prot);
  return s;
}

LelDemand lel_demand(const LelState& state, const LelParams& params, std::complex<double> v) {
  LelDemand d;
  d.p_work = workload_power(state.work.eta, params.work);
  const std::complex<double> i = motor_current(state.motor, v.real(), v.imag(), params.cool);
  const PowerPQ cool = motor_power(v.real(), v.imag(), i.real(), i.imag());
  d.p_cool = cool.p * params.cool.mva_base;
  d.q_cool = cool.q * params.cool.mva_base;
  const PowerPQ aux = aux_power(std::abs(v), params.aux);
  d.p_aux = aux.p;
  d.q_aux = aux.q;
  d.p_load = d.p_work + d.p_cool + d.p_aux;
  d.q_load = d.q_cool + d.q_aux;
  const RetainedPower r = apply_retention(state.prot.kappa, d.p_load, d.q_load);
  d.p = r.p;
  d.q = r.q;
  return d;
}

LelStepResult lel_step(const LelState& state, double v_mag, double v_angle, double omega, double dt, Rng& rng,
                       const LelParams& params) {
  if (!(dt > 0.0)) throw ValidationError("lel_step: dt must be > 0");
  const std::complex<double> v = std::polar(v_mag, v_angle);
  LelStepResult out;
  out.state.work = ou_step(state.work, params.work, dt, rng);
  out.state.motor = motor_trapezoid_step(state.motor, v.real(), v.imag(), dt, params.cool);
  out.state.motor = stall_update(out.state.motor, v_mag, dt, params.cool, v_angle);
  out.state.prot = protection_step(state.prot, v_mag, omega, dt, params.prot);
  out.demand = lel_demand(out.state, params, v);
  return out;
}

std::complex<double> lel_current_injection(double p_mw, double q_mvar, std::complex<double> v, double s_base) {
  if (!(std::abs(v) > kLowVoltageFloor))
    throw NumericalError("lel_current_injection: |V| at or below the low-voltage floor");
  return std::conj(std::complex<double>(p_mw, q_mvar) / s_base / v);
}

namespace {
constexpr const char* kSchema = "lel-params/1";
}

std::string serialize_lel_params(const LelParams& p) {
  KvDocument doc;
  doc.set("", "schema", kSchema);
  doc.set("", "archetype", to_string(p.archetype));
  const auto& w = p.work;
  doc.set("work", "p_base", w.p_base);
  doc.set("work", "p_full", w.p_full);
  doc.set("work", "tau_eta", w.tau_eta);
  doc.set("work", "mu_eta", w.mu_eta);
  doc.set("work", "sigma_xi", w.sigma_xi);
  doc.set("work", "lambda_burst", w.lambda_burst);
  doc.set("work", "lnA_mu", w.lnA_mu);
  doc.set("work", "lnA_sigma", w.lnA_sigma);
  const auto& c = p.cool;
  doc.set("cool", "r_s", c.r_s);
  doc.set("cool", "x_s", c.x_s);
  doc.set("cool", "x_m", c.x_m);
  doc.set("cool", "r_r", c.r_r);
  doc.set("cool", "x_r", c.x_r);
  doc.set("cool", "h_m", c.h_m);
  doc.set("cool", "v_stall", c.v_stall);
  doc.set("cool", "tau_stall", c.tau_stall);
  doc.set("cool", "t_cool", c.t_cool);
  doc.set("cool", "mva_base", c.mva_base);
  doc.set("cool", "load_factor", c.load_factor);
  const auto& a = p.aux;
  doc.set("aux", "p_aux0", a.p_aux0);
  doc.set("aux", "alpha_z", a.alpha_z);
  doc.set("aux", "alpha_i", a.alpha_i);
  doc.set("aux", "alpha_p", a.alpha_p);
  doc.set("aux", "beta_aux", a.beta_aux);
  doc.set("aux", "v0", a.v0);
  protection_to_kv(p.prot, doc, "prot");
  return doc.serialize();
}

LelParams parse_lel_params(const std::string& document) {
  const KvDocument doc = KvDocument::parse(document);
  if (doc.get("", "schema") != kSchema)
    throw ParseError("unsupported parameter schema '" + doc.get("", "schema") + "'");
  LelParams p;
  p.archetype = archetype_from_string(doc.get("", "archetype"));
  auto& w = p.work;
  w.p_base = doc.number("work", "p_base");
  w.p_full = doc.number("work", "p_full");
  w.tau_eta = doc.number("work", "tau_eta");
  w.mu_eta = doc.number("work", "mu_eta");
  w.sigma_xi = doc.number("work", "sigma_xi");
  w.lambda_burst = doc.number("work", "lambda_burst");
  w.lnA_mu = doc.number("work", "lnA_mu");
  w.lnA_sigma = doc.number("work", "lnA_sigma");
  auto& c = p.cool;
  c.r_s = doc.number("cool", "r_s");
  c.x_s = doc.number("cool", "x_s");
  c.x_m = doc.number("cool", "x_m");
  c.r_r = doc.number("cool", "r_r");
  c.x_r = doc.number("cool", "x_r");
  c.h_m = doc.number("cool", "h_m");
  c.v_stall = doc.number("cool", "v_stall");
  c.tau_stall = doc.number("cool", "tau_stall");
  c.t_cool = doc.number("cool", "t_cool");
  c.mva_base = doc.number("cool", "mva_base");
  c.load_factor = doc.number("cool", "load_factor");
  auto& a = p.aux;
  a.p_aux0 = doc.number("aux", "p_aux0");
  a.alpha_z = doc.number("aux", "alpha_z");
  a.alpha_i = doc.number("aux", "alpha_i");
  a.alpha_p = doc.number("aux", "alpha_p");
  a.beta_aux = doc.number("aux", "beta_aux");
  a.v0 = doc.number("aux", "v0");
  p.prot = protection_from_kv(doc, "prot");
  p.validate();
  return p;
}

}  // namespace lel
