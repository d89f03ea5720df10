#include "lel/workload.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "lel/errors.h"

namespace lel {

void WorkloadParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("workload: " + what); };
  if (!(p_base >= 0.0)) fail("p_base must be >= 0");
  if (!(p_full >= p_base)) fail("p_full must be >= p_base");
  if (!(tau_eta > 0.0)) fail("tau_eta must be > 0");
  if (!(mu_eta >= 0.0 && mu_eta <= 1.0)) fail("mu_eta must lie in [0,1]");
  if (!(sigma_xi >= 0.0)) fail("sigma_xi must be >= 0");
  if (!(lambda_burst >= 0.0)) fail("lambda_burst must be >= 0");
  if (!(lnA_sigma >= 0.0)) fail("lnA_sigma must be >= 0");
  if (!std::isfinite(lnA_mu)) fail("lnA_mu must be finite");
}

WorkloadState ou_step(const WorkloadState& state, const WorkloadParams& params, double dt, Rng& rng,
                      bool* burst_fired) {
  if (!(dt > 0.0)) throw ValidationError("ou_step: dt must be > 0");
  if (dt > 0.5 * params.tau_eta)
    throw ValidationError("ou_step: dt must not exceed tau_eta/2");
  const double burst_prob = params.lambda_burst * dt;
  if (burst_prob > 0.5)
    throw ValidationError("ou_step: lambda*dt > 0.5, step too coarse for Bernoulli thinning");

  const double tau = params.tau_eta;
  const double mu = params.mu_eta;
  double eta = mu + (state.eta - mu) * std::exp(-dt / tau);
  eta += (params.sigma_xi / tau) * std::sqrt(dt) * rng.normal();

  const bool fired = rng.uniform() < burst_prob;
  if (fired) eta += rng.lognormal(params.lnA_mu, params.lnA_sigma) / tau;
  if (burst_fired) *burst_fired = fired;

  return WorkloadState{std::clamp(eta, 0.0, 1.0)};
}

double workload_power(double eta, const WorkloadParams& params) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("workload_power: eta outside [0,1]");
  return params.p_base + eta * (params.p_full - params.p_base);
}

Trace simulate_workload(const WorkloadParams& params, double horizon, double dt, std::uint64_t seed,
                        long* burst_count) {
  if (!(dt > 0.0) || !(horizon > dt))
    throw ValidationError("simulate_workload: require horizon > dt > 0");
  params.validate();

  const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  std::vector<double> power;
  power.reserve(steps);
  Rng rng(seed);
  WorkloadState state{params.mu_eta};
  long bursts = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    bool fired = false;
    state = ou_step(state, params, dt, rng, &fired);
    bursts += fired ? 1 : 0;
    power.push_back(workload_power(state.eta, params));
  }
  if (burst_count) *burst_count = bursts;

  Trace trace = Trace::single("p", std::move(power), dt);
  trace.t0 = dt;
  trace.origin = "simulate_workload";
  return trace;
}

double poisson_log_likelihood(long event_count, double horizon, double lambda) {
  if (event_count < 0) throw ValidationError("poisson_log_likelihood: event_count must be >= 0");
  if (!(horizon > 0.0)) throw ValidationError("poisson_log_likelihood: horizon must be > 0");
  if (!(lambda > 0.0)) throw ValidationError("poisson_log_likelihood: lambda must be > 0");
  const double mean = lambda * horizon;
  const auto n = static_cast<double>(event_count);
  return -mean + n * std::log(mean) - std::lgamma(n + 1.0);
}

}  // namespace lel
