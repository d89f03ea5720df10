#pragma once

#include <cstdint>
#include <vector>

#include "lel/calibration.h"

namespace lel {

// Synthetic ground-truth setup shared by the calibration experiments: a data trace
// and an independent held-out realization drawn from known workload parameters.
struct ExperimentConfig {
  LelParams truth;
  double horizon = 7200.0;  // s
  double dt = 1.0;          // s
  std::uint64_t data_seed = 1;
  std::uint64_t holdout_seed = 2;
  double init_frac = 0.5;  // random inits are drawn uniformly from this box around the truth
  int dtw_realizations = 5;  // model realizations averaged into each held-out DTW
  CalibrationConfig calib;  // set, base and bounds are filled in from truth when empty

  void validate() const;
};

// A data-center workload whose bursts sit inside the OU noise, and a small
// pipeline (8-dim encoder, 300 evaluations).
ExperimentConfig default_experiment();
// Same pipeline on a quiet baseline with rare bursts that saturate utilization.
ExperimentConfig bursty_experiment();

struct InitOutcome {
  std::vector<double> theta_init;
  std::vector<double> theta_star;
  double initial_pattern_distance = 0.0;
  double final_pattern_distance = 0.0;
  double dtw_init = 0.0;   // mean DTW, model at theta_init vs the held-out realization
  double dtw_final = 0.0;  // model at theta_star vs the held-out realization
  Eigen::VectorXd pattern_init;
  Eigen::VectorXd pattern_final;
};

// Calibrates from `inits` random starting points drawn with seed. The encoder is
// trained once on the data trace and shared by every run.
std::vector<InitOutcome> multi_init_calibration(const ExperimentConfig& cfg, int inits, std::uint64_t seed);

// Root-mean-square over coordinates of the across-run standard deviation.
double pattern_spread(const std::vector<Eigen::VectorXd>& patterns);

struct AblationTrial {
  double dtw_pattern = 0.0;
  double dtw_mse = 0.0;
};

// Each trial draws a fresh data trace, held-out trace and starting point, then
// calibrates the same start in pattern mode and in MSE mode.
std::vector<AblationTrial> objective_ablation(const ExperimentConfig& cfg, int trials, std::uint64_t seed);

struct TclGridRow {
  int window_length = 0;
  int dim = 0;
  double initial_pattern_distance = 0.0;
  double final_pattern_distance = 0.0;
  double dtw_init = 0.0;
  double dtw_final = 0.0;
};

// Calibration quality over a grid of window lengths and embedding sizes, all runs
// starting from the same random point.
std::vector<TclGridRow> tcl_grid(const ExperimentConfig& cfg, const std::vector<int>& lengths,
                                 const std::vector<int>& dims, std::uint64_t seed);

}  // namespace lel
