#include "lel/calibration.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lel/errors.h"
#include "lel/kvtext.h"
#include "lel/workload.h"

namespace lel {

namespace {

double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Maps between the box and the unconstrained search space. Positive boxes are
// interpolated in log space, the alpha shares go through a softmax.
struct Transform {
  ParamSet set;
  std::vector<Bound> bounds;

  bool is_share(std::size_t i) const { return set == ParamSet::Aux && i >= 2; }

  std::vector<double> to_theta(const std::vector<double>& y) const {
    std::vector<double> th(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (is_share(i)) continue;
      const Bound& b = bounds[i];
      const double s = sigmoid(y[i]);
      th[i] = b.lo > 0.0 ? std::exp(std::log(b.lo) + s * (std::log(b.hi) - std::log(b.lo))) : b.lo + s * (b.hi - b.lo);
      th[i] = std::clamp(th[i], b.lo, b.hi);
    }
    if (set == ParamSet::Aux) {
      const double m = std::max({y[2], y[3], y[4]});
      const double z = std::exp(y[2] - m) + std::exp(y[3] - m) + std::exp(y[4] - m);
      for (std::size_t i = 2; i < 5; ++i) th[i] = std::exp(y[i] - m) / z;
    }
    return th;
  }

  std::vector<double> to_search(const std::vector<double>& th) const {
    std::vector<double> y(th.size());
    for (std::size_t i = 0; i < th.size(); ++i) {
      if (is_share(i)) {
        y[i] = std::log(std::max(th[i], 1e-12));
        continue;
      }
      const Bound& b = bounds[i];
      double s = b.lo > 0.0 ? (std::log(th[i]) - std::log(b.lo)) / (std::log(b.hi) - std::log(b.lo))
                            : (th[i] - b.lo) / (b.hi - b.lo);
      s = std::clamp(s, 1e-9, 1.0 - 1e-9);
      y[i] = logit(s);
    }
    return y;
  }
};

void check_in_bounds(const std::vector<double>& theta, const CalibrationConfig& cfg) {
  if (theta.size() != theta_names(cfg.set).size())
    throw ValidationError("theta has " + std::to_string(theta.size()) + " entries, expected " +
                          std::to_string(theta_names(cfg.set).size()));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const Bound& b = cfg.bounds[i];
    if (cfg.set == ParamSet::Aux && i >= 2) {
      // Shares are kept on the simplex by the softmax map rather than by the box.
      if (!(theta[i] >= 0.0 && theta[i] <= 1.0))
        throw ValidationError("theta " + theta_names(cfg.set)[i] + " must lie in [0, 1]");
      continue;
    }
    if (!(theta[i] >= b.lo - 1e-12 * std::abs(b.lo) && theta[i] <= b.hi + 1e-12 * std::abs(b.hi)))
      throw ValidationError("theta " + theta_names(cfg.set)[i] + " = " + std::to_string(theta[i]) +
                            " outside its bounds");
  }
}

PatternVector model_pattern(const std::vector<double>& theta, const Encoder& encoder, const CalibrationConfig& cfg,
                            const Trace& data) {
  const LelParams params = apply_theta(cfg.base, cfg.set, theta);
  PatternVector acc;
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = r == 0 ? cfg.sim_seed : Rng::derive(cfg.sim_seed, static_cast<std::uint64_t>(r));
    const PatternVector p = series_pattern(encoder, simulate_subsystem(params, cfg.set, data, seed), cfg.stride);
    if (r == 0) {
      acc = p;
    } else {
      acc.mean += p.mean;
      acc.var += p.var;
    }
  }
  acc.mean /= cfg.repeats;
  acc.var /= cfg.repeats;
  return acc;
}

}  // namespace

const char* to_string(ParamSet set) {
  switch (set) {
    case ParamSet::Work: return "work";
    case ParamSet::Cool: return "cool";
    case ParamSet::Aux: return "aux";
  }
  return "?";
}

ParamSet param_set_from_string(const std::string& name) {
  if (name == "work") return ParamSet::Work;
  if (name == "cool") return ParamSet::Cool;
  if (name == "aux") return ParamSet::Aux;
  throw ValidationError("unknown parameter set '" + name + "' (expected work, cool or aux)");
}

const std::vector<std::string>& theta_names(ParamSet set) {
  static const std::vector<std::string> work{"tau_eta", "mu_eta", "sigma_xi", "lambda_burst", "lnA_mu", "lnA_sigma"};
  static const std::vector<std::string> cool{"r_s", "x_s", "x_m", "r_r", "x_r", "h_m"};
  static const std::vector<std::string> aux{"p_aux0", "beta_aux", "alpha_z", "alpha_i", "alpha_p"};
  switch (set) {
    case ParamSet::Work: return work;
    case ParamSet::Cool: return cool;
    case ParamSet::Aux: return aux;
  }
  return work;
}

std::vector<double> extract_theta(const LelParams& p, ParamSet set) {
  switch (set) {
    case ParamSet::Work:
      return {p.work.tau_eta, p.work.mu_eta, p.work.sigma_xi, p.work.lambda_burst, p.work.lnA_mu, p.work.lnA_sigma};
    case ParamSet::Cool: return {p.cool.r_s, p.cool.x_s, p.cool.x_m, p.cool.r_r, p.cool.x_r, p.cool.h_m};
    case ParamSet::Aux: return {p.aux.p_aux0, p.aux.beta_aux, p.aux.alpha_z, p.aux.alpha_i, p.aux.alpha_p};
  }
  return {};
}

LelParams apply_theta(const LelParams& base, ParamSet set, const std::vector<double>& t) {
  if (t.size() != theta_names(set).size()) throw ValidationError("apply_theta: wrong theta length");
  LelParams p = base;
  switch (set) {
    case ParamSet::Work:
      p.work.tau_eta = t[0];
      p.work.mu_eta = t[1];
      p.work.sigma_xi = t[2];
      p.work.lambda_burst = t[3];
      p.work.lnA_mu = t[4];
      p.work.lnA_sigma = t[5];
      break;
    case ParamSet::Cool:
      p.cool.r_s = t[0];
      p.cool.x_s = t[1];
      p.cool.x_m = t[2];
      p.cool.r_r = t[3];
      p.cool.x_r = t[4];
      p.cool.h_m = t[5];
      break;
    case ParamSet::Aux:
      p.aux.p_aux0 = t[0];
      p.aux.beta_aux = t[1];
      p.aux.alpha_z = t[2];
      p.aux.alpha_i = t[3];
      p.aux.alpha_p = t[4];
      break;
  }
  return p;
}

std::vector<Bound> relative_bounds(ParamSet set, const std::vector<double>& ref, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw ValidationError("relative_bounds: frac must lie in (0, 1)");
  if (ref.size() != theta_names(set).size()) throw ValidationError("relative_bounds: wrong theta length");
  std::vector<Bound> b(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double w = frac * std::abs(ref[i]);
    b[i] = {ref[i] - w, ref[i] + w};
    if (w == 0.0) b[i] = {ref[i] - frac, ref[i] + frac};
    const bool fraction = (set == ParamSet::Work && i == 1) || (set == ParamSet::Aux && i >= 2);
    if (fraction) b[i] = {std::max(b[i].lo, 1e-6), std::min(b[i].hi, 1.0 - 1e-6)};
  }
  return b;
}

void CalibrationConfig::validate() const {
  const std::size_t n = theta_names(set).size();
  if (bounds.size() != n)
    throw ValidationError("calibration: expected " + std::to_string(n) + " bounds for set " + to_string(set));
  for (std::size_t i = 0; i < n; ++i) {
    if (set == ParamSet::Aux && i >= 2) continue;
    const Bound& b = bounds[i];
    if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo < b.hi))
      throw ValidationError("calibration: bound for " + theta_names(set)[i] + " must be finite with lo < hi");
  }
  if (max_evals < 1) throw ValidationError("calibration: max_evals must be >= 1");
  if (restarts < 0) throw ValidationError("calibration: restarts must be >= 0");
  if (repeats < 1) throw ValidationError("calibration: repeats must be >= 1");
  if (window_length < 2 || stride < 1 || stride > window_length)
    throw ValidationError("calibration: need L >= 2 and 1 <= stride <= L");
  tcl.validate();
}

const std::vector<double>& target_channel(const Trace& data) {
  if (data.has_channel("p")) return data.channel("p");
  if (data.channels.empty()) throw ValidationError("calibration: data trace has no channels");
  return data.channels.front().values;
}

std::vector<double> simulate_subsystem(const LelParams& params, ParamSet set, const Trace& data, std::uint64_t seed) {
  data.validate();
  const std::size_t n = data.length();
  const double dt = data.sample_period;
  std::vector<double> out;
  out.reserve(n);
  if (set == ParamSet::Work) {
    const Trace t = simulate_workload(params.work, static_cast<double>(n) * dt, dt, seed);
    out = t.channel("p");
    out.resize(n, out.empty() ? 0.0 : out.back());
    return out;
  }
  if (!data.has_channel("v"))
    throw ValidationError(std::string("calibration: the ") + to_string(set) + " block needs a voltage channel 'v'");
  const std::vector<double>& v = data.channel("v");
  if (set == ParamSet::Aux) {
    params.aux.validate();
    for (double x : v) out.push_back(aux_power(x, params.aux).p);
    return out;
  }
  params.cool.validate();
  MotorState m = motor_init(params.cool.load_factor, v.front(), params.cool);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      m = motor_trapezoid_step(m, v[k], 0.0, dt, params.cool);
      m = stall_update(m, v[k], dt, params.cool);
    }
    const auto i = motor_current(m, v[k], 0.0, params.cool);
    out.push_back(motor_power(v[k], 0.0, i.real(), i.imag()).p * params.cool.mva_base);
  }
  return out;
}

Encoder train_data_encoder(const Trace& data, const CalibrationConfig& cfg) {
  const Trace t = Trace::single("p", target_channel(data), data.sample_period);
  return train_encoder(segment_windows(t, cfg.window_length, cfg.stride), cfg.tcl, cfg.encoder_seed);
}

PatternVector data_pattern(const Trace& data, const Encoder& encoder, const CalibrationConfig& cfg) {
  return series_pattern(encoder, target_channel(data), cfg.stride);
}

double calibration_objective(const std::vector<double>& theta, const PatternVector& s_data, const Encoder& encoder,
                             const CalibrationConfig& cfg, const Trace& data) {
  check_in_bounds(theta, cfg);
  return s_data.squared_distance(model_pattern(theta, encoder, cfg, data));
}

double mean_squared_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("mean_squared_error: length mismatch");
  if (a.empty()) throw ValidationError("mean_squared_error: empty series");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double mse_objective(const std::vector<double>& theta, const Trace& data, const CalibrationConfig& cfg) {
  check_in_bounds(theta, cfg);
  const LelParams params = apply_theta(cfg.base, cfg.set, theta);
  return mean_squared_error(simulate_subsystem(params, cfg.set, data, cfg.sim_seed), target_channel(data));
}

CalibrationResult calibrate(const std::vector<double>& theta_init, const Trace& data, const CalibrationConfig& cfg,
                            const std::optional<Encoder>& encoder) {
  cfg.validate();
  data.validate();
  if (static_cast<long>(data.length()) < 4L * cfg.window_length)
    throw ValidationError("calibrate: data trace must hold at least 4 windows");
  check_in_bounds(theta_init, cfg);

  CalibrationResult res;
  res.encoder = encoder ? *encoder : train_data_encoder(data, cfg);
  const PatternVector s_data = data_pattern(data, res.encoder, cfg);
  const Transform tf{cfg.set, cfg.bounds};

  auto objective = [&](const std::vector<double>& theta) {
    ++res.evaluations;
    return cfg.mode == ObjectiveMode::Pattern ? calibration_objective(theta, s_data, res.encoder, cfg, data)
                                              : mse_objective(theta, data, cfg);
  };

  const std::size_t n = theta_init.size();
  std::vector<double> best_y = tf.to_search(theta_init);
  std::vector<double> best_theta = theta_init;
  double best_f = objective(theta_init);
  res.initial_objective = best_f;

  Rng rng(cfg.optimizer_seed);
  for (int round = 0; round <= cfg.restarts && res.evaluations < cfg.max_evals; ++round) {
    // Simplex around the incumbent; edge signs are randomized per round.
    std::vector<std::vector<double>> x(n + 1, best_y);
    std::vector<double> f(n + 1, best_f);
    const double step = round == 0 ? 0.6 : 0.3;
    for (std::size_t i = 0; i < n && res.evaluations < cfg.max_evals; ++i) {
      x[i + 1][i] += rng.uniform() < 0.5 ? step : -step;
      f[i + 1] = objective(tf.to_theta(x[i + 1]));
    }
    std::vector<std::size_t> idx(n + 1);
    auto order = [&] {
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    };
    auto eval = [&](const std::vector<double>& y) {
      return res.evaluations < cfg.max_evals ? objective(tf.to_theta(y)) : std::numeric_limits<double>::infinity();
    };
    auto blend = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
      std::vector<double> out(n);
      for (std::size_t j = 0; j < n; ++j) out[j] = c[j] + t * (w[j] - c[j]);
      return out;
    };

    while (res.evaluations < cfg.max_evals) {
      order();
      const std::size_t lo = idx.front(), hi = idx.back(), second = idx[n - 1];
      if (f[lo] < best_f) {
        best_f = f[lo];
        best_y = x[lo];
        best_theta = tf.to_theta(best_y);
      }
      res.objective_trace.push_back(best_f);

      double diameter = 0.0;
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(x[idx[i]][j] - x[lo][j]));
      if (diameter < 1e-6 || f[hi] - f[lo] <= 1e-14 * std::max(1.0, std::abs(f[lo]))) break;

      std::vector<double> centroid(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += x[idx[i]][j] / static_cast<double>(n);

      const std::vector<double> xr = blend(centroid, x[hi], -1.0);
      const double fr = eval(xr);
      if (fr < f[lo]) {
        const std::vector<double> xe = blend(centroid, x[hi], -2.0);
        const double fe = eval(xe);
        if (fe < fr) {
          x[hi] = xe;
          f[hi] = fe;
        } else {
          x[hi] = xr;
          f[hi] = fr;
        }
      } else if (fr < f[second]) {
        x[hi] = xr;
        f[hi] = fr;
      } else {
        const bool outside = fr < f[hi];
        const std::vector<double> xc = blend(centroid, outside ? xr : x[hi], 0.5);
        const double fc = eval(xc);
        if (fc < std::min(fr, f[hi])) {
          x[hi] = xc;
          f[hi] = fc;
        } else {
          for (std::size_t i = 1; i <= n && res.evaluations < cfg.max_evals; ++i) {
            x[idx[i]] = blend(x[lo], x[idx[i]], 0.5);
            f[idx[i]] = eval(x[idx[i]]);
          }
        }
      }
    }
    order();
    if (f[idx.front()] < best_f) {
      best_f = f[idx.front()];
      best_y = x[idx.front()];
      best_theta = tf.to_theta(best_y);
      res.objective_trace.push_back(best_f);
    }
  }

  res.budget_exhausted = res.evaluations >= cfg.max_evals;
  res.theta_star = best_theta;
  res.final_objective = best_f;
  res.initial_pattern_distance = calibration_objective(theta_init, s_data, res.encoder, cfg, data);
  res.final_pattern_distance = calibration_objective(best_theta, s_data, res.encoder, cfg, data);
  return res;
}

std::string calibrated_params_text(const CalibrationResult& result, const CalibrationConfig& cfg) {
  return serialize_lel_params(apply_theta(cfg.base, cfg.set, result.theta_star));
}

std::string objective_trace_csv(const CalibrationResult& result) {
  std::ostringstream os;
  os << "iteration,objective\n";
  for (std::size_t i = 0; i < result.objective_trace.size(); ++i)
    os << i << ',' << format_double(result.objective_trace[i]) << '\n';
  return os.str();
}

}  // namespace lel
