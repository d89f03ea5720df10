#include <algorithm>
#include <cmath>
#include <limits>

#include "lel/grid_sim.h"
#include "lel/metrics.h"

namespace lel {

GridCase place_lels(const GridCase& base, int k, std::uint64_t seed, std::optional<Archetype> archetype) {
  std::vector<int> buses;
  for (int id : eligible_lel_buses(base))
    if (std::none_of(base.lels.begin(), base.lels.end(), [&](const LelPlacement& p) { return p.bus == id; }))
      buses.push_back(id);
  if (k < 0 || k > static_cast<int>(buses.size()))
    throw ValidationError("place_lels: K = " + std::to_string(k) + " but only " + std::to_string(buses.size()) +
                          " eligible buses");
  // One permutation per seed; smaller K takes a prefix of the same placement.
  Rng rng(seed);
  for (std::size_t i = buses.size(); i > 1; --i) std::swap(buses[i - 1], buses[rng.next() % i]);
  GridCase out = base;
  for (int i = 0; i < k; ++i) {
    const auto a = static_cast<Archetype>(rng.next() % 3);
    out.lels.push_back({buses[i], archetype_defaults(archetype.value_or(a)), true});
  }
  return out;
}

RegimeFlags classify_regimes(const SimResult& r) {
  RegimeFlags f;
  std::vector<const EventRecord*> sheds, ramps;
  for (const EventRecord& e : r.events) {
    if (e.type == EventType::Shed) sheds.push_back(&e);
    if (e.type == EventType::RampStart) ramps.push_back(&e);
  }
  f.ride_through = sheds.empty() && !r.collapsed;

  const double t_clear = r.first_event_time(EventType::FaultCleared).value_or(0.0);
  double omega_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < r.samples(); ++k)
    if (r.time[k] > t_clear + 1e-9)
      for (const auto& w : r.omega) omega_max = std::max(omega_max, w[k]);
  for (const EventRecord* a : sheds) {
    std::vector<int> who;
    for (const EventRecord* b : sheds)
      if (b->t >= a->t && b->t <= a->t + 0.5 + 1e-9 && std::find(who.begin(), who.end(), b->lel) == who.end())
        who.push_back(b->lel);
    if (who.size() >= 3 && omega_max > 1.0) f.mass_disconnection = true;
  }

  for (const EventRecord* s : sheds) {
    const double onset = s->t - r.lels[s->lel].prot.t_delay_trip;
    for (const EventRecord* ramp : ramps)
      if (ramp->lel != s->lel && onset >= ramp->t - 1e-9) f.reconnection_retrip = true;
  }

  f.no_reconnection = r.collapsed;
  for (const LelSeries& l : r.lels) {
    if (l.prot_mode.empty()) continue;
    const auto mode = static_cast<ProtectionMode>(l.prot_mode.back());
    if (mode == ProtectionMode::Shed || mode == ProtectionMode::RecoveryWait) f.no_reconnection = true;
  }
  return f;
}

ScenarioDraw draw_scenario(const GridCase& base, int k, std::uint64_t seed, const ScenarioConfig& cfg) {
  ScenarioDraw d;
  d.grid = place_lels(base, k, Rng::derive(seed, 1), cfg.archetype);
  int bus = cfg.fault_bus;
  if (bus < 0) {
    Rng rng(Rng::derive(seed, 2));
    bus = base.buses[rng.next() % base.buses.size()].id;
  }
  d.events = fault_schedule(bus, cfg.t_fault, cfg.clear_after);
  d.sim = cfg.sim;
  d.sim.seed = Rng::derive(seed, 3);
  return d;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n % 2) return v[n / 2];
  const double a = v[n / 2 - 1], b = v[n / 2];
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
  return 0.5 * (a + b);
}

}  // namespace

SimResult random_scenario(const GridCase& base, int k, std::uint64_t seed, const ScenarioConfig& cfg) {
  const ScenarioDraw d = draw_scenario(base, k, seed, cfg);
  return run_scenario(d.grid, d.events, d.sim);
}

std::vector<SweepRow> penetration_sweep(const GridCase& base, const std::vector<int>& k_values, int trials,
                                        const ScenarioConfig& cfg, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("penetration_sweep: trials must be >= 1");
  std::vector<SweepRow> rows;
  for (int k : k_values) {
    SweepRow row;
    row.k = k;
    std::vector<double> nadir, overshoot, delay;
    for (int t = 0; t < trials; ++t) {
      const SimResult r = random_scenario(base, k, Rng::derive(seed, static_cast<std::uint64_t>(t)), cfg);
      if (r.collapsed) {
        // A collapse is the worst outcome on every metric.
        ++row.collapses;
        nadir.push_back(0.0);
        overshoot.push_back(std::numeric_limits<double>::infinity());
        delay.push_back(std::numeric_limits<double>::infinity());
        continue;
      }
      nadir.push_back(voltage_nadir(r));
      overshoot.push_back(frequency_overshoot(r));
      // The system is restored once its slowest facility is.
      double worst = 0.0;
      for (std::size_t l = 0; l < r.lels.size(); ++l) {
        const auto dl = reconnection_delay(r, static_cast<int>(l));
        worst = std::max(worst, dl ? *dl : std::numeric_limits<double>::infinity());
      }
      delay.push_back(worst);
    }
    row.voltage_nadir = median(nadir);
    row.frequency_overshoot = median(overshoot);
    row.reconnection_delay = median(delay);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lel
