#pragma once

#include <cstdint>

#include "lel/random.h"
#include "lel/trace.h"

namespace lel {

// Duty-idle workload: utilization eta follows a mean-reverting OU process with
// Poisson-timed log-normal bursts; power interpolates between idle and full duty.
struct WorkloadParams {
  double p_base = 0.0;        // MW, idle draw
  double p_full = 0.0;        // MW, full-duty draw
  double tau_eta = 1.0;       // s
  double mu_eta = 0.5;        // nominal utilization
  double sigma_xi = 0.0;      // noise intensity per sqrt(s)
  double lambda_burst = 0.0;  // bursts per second
  double lnA_mu = 0.0;        // log-normal burst amplitude
  double lnA_sigma = 0.0;

  // Throws ValidationError naming the first violated invariant.
  void validate() const;
};

struct WorkloadState {
  double eta = 0.0;
};

// One step of the exact-decay / Euler-Maruyama / Bernoulli-thinned update.
// `burst_fired`, when non-null, reports whether an impulse was drawn this step.
WorkloadState ou_step(const WorkloadState& state, const WorkloadParams& params, double dt, Rng& rng,
                      bool* burst_fired = nullptr);

double workload_power(double eta, const WorkloadParams& params);

// Active-power trace of length floor(horizon/dt) starting at eta = mu_eta.
// Samples are taken after each step. `burst_count`, when non-null, receives the
// number of impulses drawn.
Trace simulate_workload(const WorkloadParams& params, double horizon, double dt, std::uint64_t seed,
                        long* burst_count = nullptr);

// ln P(N(T) = n) for a homogeneous Poisson process with rate lambda.
double poisson_log_likelihood(long event_count, double horizon, double lambda);

}  // namespace lel
