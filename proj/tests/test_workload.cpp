#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "lel/errors.h"
#include "lel/workload.h"

using namespace lel;

namespace {

WorkloadParams quiet(double mu, double tau) {
  WorkloadParams p;
  p.p_base = 2.0;
  p.p_full = 10.0;
  p.mu_eta = mu;
  p.tau_eta = tau;
  return p;
}

// Mean and batch-means standard error of an autocorrelated series.
std::pair<double, double> batch_mean_stats(const std::vector<double>& x, std::size_t batches) {
  const std::size_t per = x.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = b * per; k < (b + 1) * per; ++k) s += x[k];
    means.push_back(s / static_cast<double>(per));
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double v = 0.0;
  for (double bm : means) v += (bm - m) * (bm - m);
  v /= static_cast<double>(batches - 1);
  return {m, std::sqrt(v / static_cast<double>(batches))};
}

}  // namespace

TEST_CASE("mean reversion fixed point") {
  WorkloadParams p = quiet(0.4, 5.0);
  Rng rng(1);
  for (double dt : {0.001, 0.1, 2.5}) {
    WorkloadState s = ou_step({0.4}, p, dt, rng);
    CHECK(s.eta == doctest::Approx(0.4).epsilon(1e-15));
  }
}

TEST_CASE("noise-free decay matches the exponential and a fine Euler integration") {
  const double tau = 3.0;
  WorkloadParams p = quiet(0.4, tau);
  Rng rng(7);
  WorkloadState s{0.6};
  const int steps = 300;
  for (int k = 0; k < steps; ++k) s = ou_step(s, p, tau / steps, rng);
  CHECK(s.eta == doctest::Approx(0.4 + 0.2 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(s.eta == doctest::Approx(0.47357588823428847).epsilon(1e-12));

  // Independent oracle: forward Euler of tau*deta/dt = -(eta - mu) with a tiny step.
  double eta = 0.6;
  const int fine = 2'000'000;
  const double h = tau / fine;
  for (int k = 0; k < fine; ++k) eta += -(eta - 0.4) / tau * h;
  CHECK(std::abs(eta - s.eta) < 1e-7);
}

TEST_CASE("composite uneven steps follow the analytic decay to 1e-12") {
  WorkloadParams p = quiet(0.25, 4.0);
  Rng rng(3);
  Rng steps_rng(11);
  WorkloadState s{0.9};
  double t = 0.0;
  for (int k = 0; k < 500; ++k) {
    const double dt = steps_rng.uniform(1e-4, 2.0);
    s = ou_step(s, p, dt, rng);
    t += dt;
    CHECK(std::abs(s.eta - (0.25 + 0.65 * std::exp(-t / 4.0))) < 1e-12);
  }
}

TEST_CASE("utilization stays inside [0,1] under heavy noise and bursts") {
  WorkloadParams p = quiet(0.5, 1.0);
  p.sigma_xi = 3.0;
  p.lambda_burst = 40.0;
  p.lnA_mu = 0.0;
  p.lnA_sigma = 1.0;
  Rng rng(2024);
  WorkloadState s{0.5};
  bool inside = true;
  for (int k = 0; k < 1'000'000; ++k) {
    s = ou_step(s, p, 0.01, rng);
    inside = inside && s.eta >= 0.0 && s.eta <= 1.0;
  }
  CHECK(inside);
}

TEST_CASE("stationary mean includes the burst contribution") {
  WorkloadParams p = quiet(0.3, 10.0);
  p.sigma_xi = 0.05;
  p.lambda_burst = 0.002;
  p.lnA_mu = -3.0;
  p.lnA_sigma = 0.3;
  Rng rng(99);
  WorkloadState s{p.mu_eta};
  std::vector<double> eta;
  eta.reserve(1'000'000);
  int clipped = 0;
  for (int k = 0; k < 1'000'000; ++k) {
    s = ou_step(s, p, 0.1, rng);
    clipped += (s.eta == 0.0 || s.eta == 1.0);
    eta.push_back(s.eta);
  }
  const auto [mean, se] = batch_mean_stats(eta, 100);
  const double expected = 0.3 + 0.002 * std::exp(-3.0 + 0.5 * 0.09);
  CHECK(clipped < 1000);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("workload power interpolates between idle and full duty") {
  WorkloadParams p = quiet(0.5, 1.0);
  CHECK(workload_power(0.0, p) == 2.0);
  CHECK(workload_power(1.0, p) == 10.0);
  CHECK(workload_power(0.25, p) == doctest::Approx(4.0));
  CHECK_THROWS_AS(workload_power(1.2, p), ValidationError);
  CHECK_THROWS_AS(workload_power(-0.1, p), ValidationError);
}

TEST_CASE("step contract errors") {
  WorkloadParams p = quiet(0.5, 1.0);
  Rng rng(1);
  CHECK_THROWS_AS(ou_step({0.5}, p, 0.0, rng), ValidationError);
  CHECK_THROWS_AS(ou_step({0.5}, p, -1.0, rng), ValidationError);
  p.lambda_burst = 2.0;
  CHECK_THROWS_AS(ou_step({0.5}, p, 0.3, rng), ValidationError);
  CHECK_NOTHROW(ou_step({0.5}, p, 0.25, rng));
}

TEST_CASE("simulated traces are deterministic per seed") {
  WorkloadParams p = quiet(0.4, 20.0);
  p.sigma_xi = 0.3;
  p.lambda_burst = 0.01;
  p.lnA_mu = 1.5;
  p.lnA_sigma = 0.3;
  const Trace a = simulate_workload(p, 500.0, 1.0, 42);
  const Trace b = simulate_workload(p, 500.0, 1.0, 42);
  const Trace c = simulate_workload(p, 500.0, 1.0, 43);
  CHECK(a.length() == 500);
  CHECK(a.channel("p") == b.channel("p"));
  CHECK(a.channel("p") != c.channel("p"));
}

TEST_CASE("quiet workload gives a constant trace") {
  WorkloadParams p = quiet(0.4, 20.0);
  const Trace t = simulate_workload(p, 100.0, 0.5, 5);
  CHECK(t.length() == 200);
  for (double v : t.channel("p")) CHECK(v == doctest::Approx(workload_power(0.4, p)).epsilon(1e-14));
}

TEST_CASE("burst count follows the Poisson rate") {
  WorkloadParams p = quiet(0.3, 10.0);
  p.lambda_burst = 0.01;
  p.lnA_mu = -2.0;
  long bursts = 0;
  simulate_workload(p, 1e5, 1.0, 17, &bursts);
  CHECK(std::abs(bursts - 1000.0) <= 3.0 * std::sqrt(1000.0));
}

TEST_CASE("Poisson log-likelihood") {
  CHECK(poisson_log_likelihood(0, 1.0, 1.0) == doctest::Approx(-1.0));
  CHECK(poisson_log_likelihood(2, 1.0, 2.0) == doctest::Approx(-2.0 + std::log(2.0)));
  CHECK(poisson_log_likelihood(2, 1.0, 2.0) == doctest::Approx(-1.3068528194400546));
  CHECK_THROWS_AS(poisson_log_likelihood(1, 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(poisson_log_likelihood(-1, 1.0, 1.0), ValidationError);

  // One observed sequence (3 events in 10 s) is compatible with many rates.
  const double a = poisson_log_likelihood(3, 10.0, 0.3);
  const double b = poisson_log_likelihood(3, 10.0, 0.5);
  CHECK(std::isfinite(a));
  CHECK(std::isfinite(b));
  CHECK(a != b);
  for (double lambda : {1e-6, 1e-3, 0.1, 1.0, 50.0, 1e4}) {
    for (long n : {0L, 1L, 7L, 1000L}) CHECK(std::isfinite(poisson_log_likelihood(n, 10.0, lambda)));
  }
}
