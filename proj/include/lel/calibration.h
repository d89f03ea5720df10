#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lel/lel_model.h"
#include "lel/tcl_features.h"
#include "lel/trace.h"

namespace lel {

// Which block's parameters are fitted. Parameter order in theta:
//   Work: tau_eta, mu_eta, sigma_xi, lambda_burst, lnA_mu, lnA_sigma
//   Cool: r_s, x_s, x_m, r_r, x_r, h_m
//   Aux:  p_aux0, beta_aux, alpha_z, alpha_i, alpha_p
// Work is fitted to channel "p" of the data trace; Cool and Aux are driven by the
// measured voltage channel "v" and fitted to "p".
enum class ParamSet { Work, Cool, Aux };
enum class ObjectiveMode { Pattern, Mse };

const char* to_string(ParamSet set);
ParamSet param_set_from_string(const std::string& name);
const std::vector<std::string>& theta_names(ParamSet set);

std::vector<double> extract_theta(const LelParams& params, ParamSet set);
LelParams apply_theta(const LelParams& base, ParamSet set, const std::vector<double>& theta);

struct Bound {
  double lo = 0.0;
  double hi = 0.0;
};

// The alpha shares ignore their box: the search keeps them on the unit simplex.
// Box of +-frac around a reference theta (relative to |value|). Fractions are
// clipped to (0, 1) for mu_eta and the alpha shares.
std::vector<Bound> relative_bounds(ParamSet set, const std::vector<double>& reference, double frac);

struct CalibrationConfig {
  ParamSet set = ParamSet::Work;
  ObjectiveMode mode = ObjectiveMode::Pattern;
  std::vector<Bound> bounds;
  int max_evals = 300;
  int restarts = 1;
  std::uint64_t sim_seed = 1;
  std::uint64_t encoder_seed = 1;
  std::uint64_t optimizer_seed = 1;
  int repeats = 1;  // simulated realizations averaged into s_model
  int window_length = 5;
  int stride = 2;
  TclConfig tcl;
  LelParams base;  // blocks that are not being fitted

  void validate() const;
};

// Simulated series of the selected block over the data trace's grid.
std::vector<double> simulate_subsystem(const LelParams& params, ParamSet set, const Trace& data, std::uint64_t seed);

// Squared pattern distance between the data and the model at theta (fixed sim_seed).
double calibration_objective(const std::vector<double>& theta, const PatternVector& data_pattern,
                             const Encoder& encoder, const CalibrationConfig& cfg, const Trace& data);

// Mean squared pointwise error between the model at theta and the data's target channel.
double mse_objective(const std::vector<double>& theta, const Trace& data, const CalibrationConfig& cfg);
double mean_squared_error(const std::vector<double>& a, const std::vector<double>& b);

struct CalibrationResult {
  std::vector<double> theta_star;
  std::vector<double> objective_trace;  // best objective after each simplex iteration
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double initial_pattern_distance = 0.0;
  double final_pattern_distance = 0.0;
  int evaluations = 0;
  bool budget_exhausted = false;
  Encoder encoder;
};

// Trains an encoder on the data (unless one is supplied), then minimizes the
// configured objective with a bounded Nelder-Mead search.
CalibrationResult calibrate(const std::vector<double>& theta_init, const Trace& data, const CalibrationConfig& cfg,
                            const std::optional<Encoder>& encoder = std::nullopt);

// Data windows and pattern, as used inside calibrate.
const std::vector<double>& target_channel(const Trace& data);
Encoder train_data_encoder(const Trace& data, const CalibrationConfig& cfg);
PatternVector data_pattern(const Trace& data, const Encoder& encoder, const CalibrationConfig& cfg);

// Fitted parameters in the parameter-exchange format, and the objective trace as CSV
// (iteration,objective).
std::string calibrated_params_text(const CalibrationResult& result, const CalibrationConfig& cfg);
std::string objective_trace_csv(const CalibrationResult& result);

}  // namespace lel
