#include <cmath>
#include <vector>

#include "doctest.h"
#include "lel/calibration.h"
#include "lel/errors.h"
#include "lel/workload.h"

using namespace lel;

namespace {

LelParams truth() {
  LelParams p = archetype_defaults(Archetype::Datacenter);
  p.work.tau_eta = 20.0;
  p.work.mu_eta = 0.5;
  p.work.sigma_xi = 1.0;
  p.work.lambda_burst = 0.01;
  p.work.lnA_mu = std::log(5.0);
  p.work.lnA_sigma = 0.3;
  return p;
}

CalibrationConfig small_config(const LelParams& base, ParamSet set) {
  CalibrationConfig cfg;
  cfg.set = set;
  cfg.base = base;
  cfg.bounds = relative_bounds(set, extract_theta(base, set), 0.5);
  cfg.tcl.dim = 8;
  cfg.tcl.hidden = 16;
  cfg.tcl.epochs = 10;
  cfg.tcl.batch = 32;
  cfg.max_evals = 150;
  cfg.sim_seed = 42;
  return cfg;
}

Trace work_data(const LelParams& p, std::uint64_t seed, double horizon = 3600.0) {
  return simulate_workload(p.work, horizon, 1.0, seed);
}

// Voltage excursion that the cooling and auxiliary blocks respond to.
Trace voltage_data(const LelParams& p, ParamSet set, double dt = 0.01) {
  std::vector<double> v;
  for (int k = 0; k < 600; ++k) {
    const double t = k * dt;
    v.push_back(1.0 - (t > 1.0 && t < 1.3 ? 0.25 : 0.0) + 0.02 * std::sin(3.0 * t));
  }
  Trace data = Trace::single("v", v, dt);
  data.channels.push_back({"p", simulate_subsystem(p, set, data, 1)});
  return data;
}

std::vector<double> random_init(const std::vector<Bound>& b, Rng& rng) {
  std::vector<double> th;
  for (const Bound& x : b) th.push_back(rng.uniform(x.lo, x.hi));
  return th;
}

}  // namespace

TEST_CASE("theta plumbing") {
  const LelParams p = truth();
  for (ParamSet s : {ParamSet::Work, ParamSet::Cool, ParamSet::Aux}) {
    CHECK(param_set_from_string(to_string(s)) == s);
    const auto th = extract_theta(p, s);
    CHECK(th.size() == theta_names(s).size());
    CHECK(serialize_lel_params(apply_theta(p, s, th)) == serialize_lel_params(p));
  }
  CHECK_THROWS_AS(param_set_from_string("prot"), ValidationError);
  const auto b = relative_bounds(ParamSet::Work, extract_theta(p, ParamSet::Work), 0.5);
  CHECK(b[0].lo == 10.0);
  CHECK(b[0].hi == 30.0);
  CHECK(b[1].lo == 0.25);
}

TEST_CASE("objective is deterministic, zero at the generating theta and grows under perturbation") {
  const LelParams p = truth();
  CalibrationConfig cfg = small_config(p, ParamSet::Work);
  const Trace data = work_data(p, cfg.sim_seed);
  const Encoder enc = train_data_encoder(data, cfg);
  const PatternVector s = data_pattern(data, enc, cfg);
  const auto th = extract_theta(p, ParamSet::Work);
  CHECK(calibration_objective(th, s, enc, cfg, data) == 0.0);
  CHECK(mse_objective(th, data, cfg) == 0.0);
  for (std::size_t i = 0; i < th.size(); ++i) {
    auto moved = th;
    moved[i] = moved[i] + 0.5 * std::abs(moved[i]);
    if (i == 1) moved[i] = std::min(moved[i], cfg.bounds[i].hi);
    const double a = calibration_objective(moved, s, enc, cfg, data);
    CHECK(a > 0.0);
    CHECK(a == calibration_objective(moved, s, enc, cfg, data));
  }
  auto outside = th;
  outside[0] = 100.0;
  CHECK_THROWS_AS(calibration_objective(outside, s, enc, cfg, data), ValidationError);
  CHECK_THROWS_AS(mse_objective(outside, data, cfg), ValidationError);
}

TEST_CASE("mean squared error") {
  CHECK(mean_squared_error({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(mean_squared_error({1, 2, 3}, {1.5, 2.5, 3.5}) == 0.25);
  CHECK_THROWS_AS(mean_squared_error({1, 2}, {1, 2, 3}), ValidationError);
}

TEST_CASE("calibration from the generating theta stays put") {
  const LelParams p = truth();
  CalibrationConfig cfg = small_config(p, ParamSet::Work);
  cfg.max_evals = 40;
  const Trace data = work_data(p, cfg.sim_seed);
  const auto th = extract_theta(p, ParamSet::Work);
  const CalibrationResult r = calibrate(th, data, cfg);
  CHECK(r.final_objective < 1e-10);
  CHECK(r.theta_star == th);
}

TEST_CASE("calibration halves the pattern distance from a perturbed start") {
  const LelParams p = truth();
  CalibrationConfig cfg = small_config(p, ParamSet::Work);
  const Trace data = work_data(p, 7);
  const Encoder enc = train_data_encoder(data, cfg);
  Rng rng(3);
  for (int run = 0; run < 3; ++run) {
    const auto init = random_init(cfg.bounds, rng);
    const CalibrationResult r = calibrate(init, data, cfg, enc);
    CHECK(r.final_pattern_distance <= 0.5 * r.initial_pattern_distance);
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
      CHECK(r.objective_trace[k] <= r.objective_trace[k - 1]);
    CHECK(r.evaluations <= cfg.max_evals);
    for (std::size_t i = 0; i < init.size(); ++i) {
      CHECK(r.theta_star[i] >= cfg.bounds[i].lo);
      CHECK(r.theta_star[i] <= cfg.bounds[i].hi);
    }
  }
}

TEST_CASE("auxiliary and cooling blocks fit in MSE mode") {
  LelParams p = truth();
  for (ParamSet set : {ParamSet::Aux, ParamSet::Cool}) {
    const Trace data = voltage_data(p, set);
    CalibrationConfig cfg = small_config(p, set);
    cfg.mode = ObjectiveMode::Mse;
    cfg.tcl.epochs = 2;
    Rng rng(9);
    auto init = random_init(cfg.bounds, rng);
    if (set == ParamSet::Aux) {
      const double s = init[2] + init[3] + init[4];
      for (int i = 2; i < 5; ++i) init[i] /= s;
    }
    const CalibrationResult r = calibrate(init, data, cfg);
    CHECK(r.final_objective < 0.1 * r.initial_objective);
    const LelParams fitted = apply_theta(p, set, r.theta_star);
    CHECK_NOTHROW(fitted.validate());
  }
}

TEST_CASE("budget exhaustion returns the best point with a flag") {
  const LelParams p = truth();
  CalibrationConfig cfg = small_config(p, ParamSet::Work);
  cfg.max_evals = 3;
  const Trace data = work_data(p, 5, 600.0);
  Rng rng(4);
  const CalibrationResult r = calibrate(random_init(cfg.bounds, rng), data, cfg);
  CHECK(r.budget_exhausted);
  CHECK(r.evaluations == 3);
  CHECK(r.final_objective <= r.initial_objective);
  CHECK(objective_trace_csv(r).rfind("iteration,objective\n", 0) == 0);
  CHECK(parse_lel_params(calibrated_params_text(r, cfg)).work.tau_eta == r.theta_star[0]);
}

TEST_CASE("configuration errors") {
  const LelParams p = truth();
  CalibrationConfig cfg = small_config(p, ParamSet::Work);
  const Trace data = work_data(p, 5, 600.0);
  cfg.bounds.pop_back();
  CHECK_THROWS_AS(calibrate(extract_theta(p, ParamSet::Work), data, cfg), ValidationError);
  cfg = small_config(p, ParamSet::Work);
  cfg.max_evals = 0;
  CHECK_THROWS_AS(calibrate(extract_theta(p, ParamSet::Work), data, cfg), ValidationError);
  cfg = small_config(p, ParamSet::Cool);
  CHECK_THROWS_AS(calibrate(extract_theta(p, ParamSet::Cool), data, cfg), ValidationError);
  cfg = small_config(p, ParamSet::Work);
  CHECK_THROWS_AS(calibrate(extract_theta(p, ParamSet::Work), work_data(p, 5, 10.0), cfg), ValidationError);
}
