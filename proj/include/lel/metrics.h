#pragma once

#include <optional>
#include <vector>

#include "lel/sim_result.h"

namespace lel {

// Dynamic time warping with absolute-difference local cost, full DP table.
double dtw_raw(const std::vector<double>& a, const std::vector<double>& b);
// DTW after z-normalizing each input. A constant input is only mean-centred.
double dtw_distance(const std::vector<double>& a, const std::vector<double>& b);
std::vector<double> z_normalize(const std::vector<double>& x);

// Largest Pearson correlation of the overlapping segments over lags
// |l| <= max_lag_frac * min(len a, len b).
double max_cross_correlation(const std::vector<double>& a, const std::vector<double>& b,
                             double max_lag_frac = 0.25);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct MetricReport {
  double dtw = 0.0;
  double max_xcorr = 0.0;
  double cosine = 0.0;
};

// All three shape metrics; the cosine is taken on z-normalized inputs of equal length
// (the longer series is truncated).
MetricReport compare_series(const std::vector<double>& model, const std::vector<double>& data,
                            double max_lag_frac = 0.25);

// Minimum |V| at a bus after the first fault clearing, or over the whole run if
// the log has no clearing.
double voltage_nadir(const SimResult& result, int bus_id);
// Minimum over all buses of voltage_nadir.
double voltage_nadir(const SimResult& result);

// Largest |omega - 1| over generators after the first fault clearing (whole run without one).
double frequency_overshoot(const SimResult& result);

// Time from fault clearing until kappa first returns to its cap after the LEL's
// first trip. 0 if the LEL never trips; nullopt ("never") if it does not return
// within the horizon.
std::optional<double> reconnection_delay(const SimResult& result, int lel_index);

}  // namespace lel
