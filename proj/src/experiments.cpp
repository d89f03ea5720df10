#include "lel/experiments.h"

#include <cmath>

#include "lel/errors.h"
#include "lel/metrics.h"
#include "lel/workload.h"

namespace lel {

void ExperimentConfig::validate() const {
  truth.validate();
  if (!(horizon > 0.0 && dt > 0.0 && dt < horizon)) throw ValidationError("experiment: need 0 < dt < horizon");
  if (!(init_frac > 0.0 && init_frac < 1.0)) throw ValidationError("experiment: init_frac must lie in (0, 1)");
  if (dtw_realizations < 1) throw ValidationError("experiment: dtw_realizations must be >= 1");
}

ExperimentConfig default_experiment() {
  ExperimentConfig e;
  LelParams& p = e.truth;
  p = archetype_defaults(Archetype::Datacenter);
  p.work.tau_eta = 20.0;
  p.work.mu_eta = 0.5;
  p.work.sigma_xi = 1.0;
  p.work.lambda_burst = 0.01;
  p.work.lnA_mu = std::log(5.0);
  p.work.lnA_sigma = 0.3;
  e.calib.tcl.dim = 8;
  e.calib.tcl.hidden = 16;
  e.calib.tcl.epochs = 10;
  e.calib.tcl.batch = 32;
  e.calib.max_evals = 300;
  e.calib.sim_seed = 42;
  return e;
}

ExperimentConfig bursty_experiment() {
  ExperimentConfig e = default_experiment();
  WorkloadParams& w = e.truth.work;
  w.mu_eta = 0.3;
  w.sigma_xi = 0.3;
  w.lambda_burst = 0.005;
  w.lnA_mu = std::log(20.0);
  return e;
}

namespace {

CalibrationConfig filled(const ExperimentConfig& e) {
  CalibrationConfig c = e.calib;
  c.base = e.truth;
  if (c.bounds.empty()) c.bounds = relative_bounds(c.set, extract_theta(e.truth, c.set), e.init_frac);
  return c;
}

// Random start inside the box; the alpha shares are renormalized onto the simplex.
std::vector<double> draw_init(const CalibrationConfig& c, Rng& rng) {
  std::vector<double> th;
  for (const Bound& b : c.bounds) th.push_back(rng.uniform(b.lo, b.hi));
  if (c.set == ParamSet::Aux) {
    const double s = th[2] + th[3] + th[4];
    for (int i = 2; i < 5; ++i) th[i] /= s;
  }
  return th;
}

struct Data {
  Trace data;
  Trace holdout;
};

Data make_data(const ExperimentConfig& e, std::uint64_t data_seed, std::uint64_t holdout_seed) {
  if (e.calib.set != ParamSet::Work)
    throw ValidationError("experiment: the synthetic experiments fit the workload block");
  return {simulate_workload(e.truth.work, e.horizon, e.dt, data_seed),
          simulate_workload(e.truth.work, e.horizon, e.dt, holdout_seed)};
}

std::vector<double> model_series(const CalibrationConfig& c, const std::vector<double>& theta, const Trace& data) {
  return simulate_subsystem(apply_theta(c.base, c.set, theta), c.set, data, c.sim_seed);
}

double holdout_dtw(const ExperimentConfig& e, const CalibrationConfig& c, const std::vector<double>& theta,
                   const Data& d) {
  const LelParams p = apply_theta(c.base, c.set, theta);
  double sum = 0.0;
  for (int r = 0; r < e.dtw_realizations; ++r)
    sum += dtw_distance(simulate_subsystem(p, c.set, d.data, Rng::derive(c.sim_seed, 100 + static_cast<std::uint64_t>(r))),
                        target_channel(d.holdout));
  return sum / e.dtw_realizations;
}

}  // namespace

std::vector<InitOutcome> multi_init_calibration(const ExperimentConfig& e, int inits, std::uint64_t seed) {
  e.validate();
  if (inits < 1) throw ValidationError("experiment: need at least one init");
  const CalibrationConfig c = filled(e);
  const Data d = make_data(e, e.data_seed, e.holdout_seed);
  const Encoder enc = train_data_encoder(d.data, c);
  Rng rng(seed);
  std::vector<InitOutcome> out;
  for (int i = 0; i < inits; ++i) {
    InitOutcome o;
    o.theta_init = draw_init(c, rng);
    const CalibrationResult r = calibrate(o.theta_init, d.data, c, enc);
    o.theta_star = r.theta_star;
    o.initial_pattern_distance = r.initial_pattern_distance;
    o.final_pattern_distance = r.final_pattern_distance;
    o.dtw_init = holdout_dtw(e, c, o.theta_init, d);
    o.dtw_final = holdout_dtw(e, c, o.theta_star, d);
    o.pattern_init = series_pattern(enc, model_series(c, o.theta_init, d.data), c.stride).flat();
    o.pattern_final = series_pattern(enc, model_series(c, o.theta_star, d.data), c.stride).flat();
    out.push_back(std::move(o));
  }
  return out;
}

double pattern_spread(const std::vector<Eigen::VectorXd>& patterns) {
  if (patterns.size() < 2) throw ValidationError("pattern_spread: need at least two patterns");
  const long n = patterns.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n), sq = Eigen::VectorXd::Zero(n);
  for (const auto& p : patterns) {
    if (p.size() != n) throw ValidationError("pattern_spread: length mismatch");
    mean += p;
  }
  mean /= static_cast<double>(patterns.size());
  for (const auto& p : patterns) sq += (p - mean).cwiseAbs2();
  return std::sqrt(sq.sum() / static_cast<double>((patterns.size() - 1) * static_cast<std::size_t>(n)));
}

std::vector<AblationTrial> objective_ablation(const ExperimentConfig& e, int trials, std::uint64_t seed) {
  e.validate();
  if (trials < 1) throw ValidationError("experiment: need at least one trial");
  std::vector<AblationTrial> out;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t ts = Rng::derive(seed, static_cast<std::uint64_t>(t));
    CalibrationConfig c = filled(e);
    c.sim_seed = Rng::derive(ts, 3);
    const Data d = make_data(e, Rng::derive(ts, 1), Rng::derive(ts, 2));
    Rng rng(Rng::derive(ts, 4));
    const auto init = draw_init(c, rng);
    AblationTrial a;
    c.mode = ObjectiveMode::Pattern;
    a.dtw_pattern = holdout_dtw(e, c, calibrate(init, d.data, c).theta_star, d);
    c.mode = ObjectiveMode::Mse;
    a.dtw_mse = holdout_dtw(e, c, calibrate(init, d.data, c).theta_star, d);
    out.push_back(a);
  }
  return out;
}

std::vector<TclGridRow> tcl_grid(const ExperimentConfig& e, const std::vector<int>& lengths,
                                 const std::vector<int>& dims, std::uint64_t seed) {
  e.validate();
  const Data d = make_data(e, e.data_seed, e.holdout_seed);
  CalibrationConfig c = filled(e);
  Rng rng(seed);
  const auto init = draw_init(c, rng);
  const double dtw_init = holdout_dtw(e, c, init, d);
  std::vector<TclGridRow> out;
  for (int l : lengths)
    for (int dim : dims) {
      c.window_length = l;
      c.stride = default_stride(l);
      c.tcl.dim = dim;
      const CalibrationResult r = calibrate(init, d.data, c);
      out.push_back({l, dim, r.initial_pattern_distance, r.final_pattern_distance, dtw_init,
                     holdout_dtw(e, c, r.theta_star, d)});
    }
  return out;
}

}  // namespace lel
