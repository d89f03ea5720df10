#include "lel/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lel/errors.h"

namespace lel {

namespace {

double mean_of(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s / static_cast<double>(n);
}

// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(const double* a, const double* b, std::size_t n) {
  const double ma = mean_of(a, n);
  const double mb = mean_of(b, n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::size_t start_sample(const SimResult& r) {
  const auto clear = r.first_event_time(EventType::FaultCleared);
  if (!clear) return 0;
  std::size_t k = 0;
  while (k < r.time.size() && r.time[k] <= *clear + 1e-9) ++k;
  return k;
}

}  // namespace

double dtw_raw(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ValidationError("dtw: empty series");
  const std::size_t m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::abs(a[i - 1] - b[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    std::swap(prev, cur);
  }
  return prev[m];
}

std::vector<double> z_normalize(const std::vector<double>& x) {
  if (x.empty()) return {};
  const double mu = mean_of(x.data(), x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = sd > 0.0 ? (x[i] - mu) / sd : x[i] - mu;
  return z;
}

double dtw_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ValidationError("dtw: empty series");
  return dtw_raw(z_normalize(a), z_normalize(b));
}

double max_cross_correlation(const std::vector<double>& a, const std::vector<double>& b, double max_lag_frac) {
  if (a.size() < 4 || b.size() < 4) throw ValidationError("max_cross_correlation: series shorter than 4");
  if (!(max_lag_frac > 0.0 && max_lag_frac <= 0.5))
    throw ValidationError("max_cross_correlation: max_lag_frac must lie in (0, 0.5]");
  const std::size_t n = std::min(a.size(), b.size());
  if (!pearson(a.data(), a.data(), a.size()) || !pearson(b.data(), b.data(), b.size()))
    throw UndefinedMetricError("max_cross_correlation: constant series");
  const long max_lag = static_cast<long>(std::floor(max_lag_frac * static_cast<double>(n)));
  double best = -std::numeric_limits<double>::infinity();
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    // Pair a[i] with b[i + lag].
    const std::size_t ia = lag < 0 ? static_cast<std::size_t>(-lag) : 0;
    const std::size_t ib = lag > 0 ? static_cast<std::size_t>(lag) : 0;
    const std::size_t len = std::min(a.size() - ia, b.size() - ib);
    if (len < 2) continue;
    if (const auto r = pearson(a.data() + ia, b.data() + ib, len)) best = std::max(best, *r);
  }
  if (!std::isfinite(best)) throw UndefinedMetricError("max_cross_correlation: every overlap is constant");
  return best;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ValidationError("cosine_similarity: zero vector");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

MetricReport compare_series(const std::vector<double>& model, const std::vector<double>& data, double max_lag_frac) {
  MetricReport r;
  r.dtw = dtw_distance(model, data);
  r.max_xcorr = max_cross_correlation(model, data, max_lag_frac);
  const std::size_t n = std::min(model.size(), data.size());
  r.cosine = cosine_similarity(z_normalize({model.begin(), model.begin() + static_cast<long>(n)}),
                               z_normalize({data.begin(), data.begin() + static_cast<long>(n)}));
  return r;
}

double voltage_nadir(const SimResult& result, int bus_id) {
  const auto& v = result.v_mag.at(static_cast<std::size_t>(result.bus_index(bus_id)));
  const std::size_t k0 = std::min(start_sample(result), v.empty() ? 0 : v.size() - 1);
  if (v.empty()) throw ValidationError("voltage_nadir: empty result");
  return *std::min_element(v.begin() + static_cast<long>(k0), v.end());
}

double voltage_nadir(const SimResult& result) {
  double lo = std::numeric_limits<double>::infinity();
  for (int id : result.bus_ids) lo = std::min(lo, voltage_nadir(result, id));
  return lo;
}

double frequency_overshoot(const SimResult& result) {
  const std::size_t k0 = start_sample(result);
  double hi = 0.0;
  for (const auto& w : result.omega)
    for (std::size_t k = k0; k < w.size(); ++k) hi = std::max(hi, std::abs(w[k] - 1.0));
  return hi;
}

std::optional<double> reconnection_delay(const SimResult& result, int lel_index) {
  if (lel_index < 0 || static_cast<std::size_t>(lel_index) >= result.lels.size())
    throw ValidationError("reconnection_delay: no LEL with index " + std::to_string(lel_index));
  const LelSeries& s = result.lels[static_cast<std::size_t>(lel_index)];
  const double cap = s.prot.kappa_cap();
  std::size_t k = 0;
  while (k < s.kappa.size() && s.kappa[k] >= cap - 1e-9) ++k;
  if (k == s.kappa.size()) return 0.0;
  while (k < s.kappa.size() && s.kappa[k] < cap - 1e-9) ++k;
  if (k == s.kappa.size()) return std::nullopt;
  const double clear = result.first_event_time(EventType::FaultCleared).value_or(0.0);
  return std::max(0.0, result.time[k] - clear);
}

}  // namespace lel
