#include <cmath>
#include <complex>

#include "doctest.h"
#include "lel/errors.h"
#include "lel/lel_model.h"
#include "lel/tcl_features.h"

using namespace lel;
using cd = std::complex<double>;

namespace {

LelParams quiet(Archetype a) {
  LelParams p = archetype_defaults(a);
  p.work.sigma_xi = 0.0;
  p.work.lambda_burst = 0.0;
  return p;
}

}  // namespace

TEST_CASE("archetype defaults validate and name round-trips") {
  for (Archetype a : {Archetype::Datacenter, Archetype::CryptoMining, Archetype::Electrolyzer}) {
    const LelParams p = archetype_defaults(a);
    CHECK_NOTHROW(p.validate());
    CHECK(p.archetype == a);
    CHECK(archetype_from_string(to_string(a)) == a);
    const double size = a == Archetype::Datacenter ? 100.0 : (a == Archetype::CryptoMining ? 50.0 : 200.0);
    CHECK(p.nominal_mw() == doctest::Approx(size));
  }
  CHECK_THROWS_AS(archetype_from_string("STEEL_MILL"), ValidationError);
  CHECK(archetype_defaults(Archetype::CryptoMining).work.mu_eta >
        archetype_defaults(Archetype::Datacenter).work.mu_eta);
  CHECK(archetype_defaults(Archetype::CryptoMining).work.sigma_xi <
        archetype_defaults(Archetype::Datacenter).work.sigma_xi);
  CHECK(archetype_defaults(Archetype::Electrolyzer).work.tau_eta >
        archetype_defaults(Archetype::Datacenter).work.tau_eta);
  CHECK(archetype_defaults(Archetype::Electrolyzer).prot.delta_v <
        archetype_defaults(Archetype::Datacenter).prot.delta_v);
}

TEST_CASE("allocation splits demand by share") {
  const LelParams base = archetype_defaults(Archetype::Datacenter);
  const LelParams p = allocate_demand(base, 250.0);
  const LelState s = lel_init(p, 1.0);
  const LelDemand d = lel_demand(s, p, cd(1.0, 0.0));
  CHECK(d.p_load == doctest::Approx(250.0).epsilon(1e-9));
  CHECK(d.p_work == doctest::Approx(150.0).epsilon(1e-9));
  CHECK(d.p_cool == doctest::Approx(75.0).epsilon(1e-9));
  CHECK(d.p_aux == doctest::Approx(25.0).epsilon(1e-9));
  CHECK(d.p == d.p_load);

  const LelParams pinned = allocate_demand(base, 250.0, {}, 100.0);
  CHECK(pinned.cool.mva_base == 100.0);
  CHECK(pinned.cool.load_factor == doctest::Approx(0.75));
  CHECK_THROWS_AS(allocate_demand(base, 250.0, {}, 50.0), NoEquilibriumError);
  CHECK_THROWS_AS(allocate_demand(base, -1.0), ValidationError);
  CHECK_THROWS_AS(allocate_demand(base, 100.0, {0.5, 0.5, 0.5}), ValidationError);
}

TEST_CASE("quiet facility holds its operating point") {
  for (Archetype a : {Archetype::Datacenter, Archetype::CryptoMining, Archetype::Electrolyzer}) {
    const LelParams p = quiet(a);
    const double v = 0.98;
    LelState s = lel_init(p, v, 0.1);
    const LelDemand d0 = lel_demand(s, p, std::polar(v, 0.1));
    Rng rng(3);
    double worst = 0.0;
    for (int k = 0; k < 4000; ++k) {
      const LelStepResult r = lel_step(s, v, 0.1, 1.0, 0.01, rng, p);
      s = r.state;
      worst = std::max({worst, std::abs(r.demand.p - d0.p), std::abs(r.demand.q - d0.q)});
    }
    // Drift in pu of the facility's nominal demand.
    CHECK(worst / p.nominal_mw() < 1e-6);
    CHECK(s.prot.mode == ProtectionMode::Connected);
  }
}

TEST_CASE("trip scales the aggregate by kappa_min") {
  const LelParams p = quiet(Archetype::Datacenter);
  LelState s = lel_init(p, 1.0);
  Rng rng(4);
  // Over-frequency trip at nominal voltage, so the cooling block keeps running.
  const double w = p.prot.omega_ref + 1.5 * p.prot.delta_omega;
  bool seen = false;
  for (int k = 0; k < 100 && !seen; ++k) {
    const LelStepResult r = lel_step(s, p.prot.v_ref, 0.0, w, 0.01, rng, p);
    if (r.state.prot.mode == ProtectionMode::Shed && s.prot.mode != ProtectionMode::Shed) {
      CHECK(r.demand.p == doctest::Approx(p.prot.kappa_min * r.demand.p_load).epsilon(1e-12));
      CHECK(r.demand.q == doctest::Approx(p.prot.kappa_min * r.demand.q_load).epsilon(1e-12));
      CHECK(r.demand.p_load - r.demand.p == doctest::Approx((1 - p.prot.kappa_min) * r.demand.p_load));
      seen = true;
    }
    s = r.state;
  }
  CHECK(seen);
}

TEST_CASE("deep sag with protection disabled removes exactly the cooling draw") {
  LelParams p = quiet(Archetype::Datacenter);
  p.prot.delta_v = 1e3;
  p.prot.delta_omega = 1e3;
  LelState s = lel_init(p, 1.0);
  Rng rng(5);
  const double v = 0.5 * p.cool.v_stall;
  const int steps = static_cast<int>(std::ceil(p.cool.tau_stall / 0.01)) + 2;
  LelStepResult r{};
  for (int k = 0; k < steps; ++k) {
    r = lel_step(s, v, 0.0, 1.0, 0.01, rng, p);
    s = r.state;
  }
  REQUIRE(s.motor.mode == MotorMode::StallTripped);
  // Component-isolation oracle: workload at its mean plus the ZIP auxiliary at this voltage.
  const double work = workload_power(p.work.mu_eta, p.work);
  const PowerPQ aux = aux_power(v, p.aux);
  CHECK(r.demand.p_cool == 0.0);
  CHECK(r.demand.q_cool == 0.0);
  CHECK(r.demand.p == doctest::Approx(work + aux.p).epsilon(1e-12));
  CHECK(r.demand.q == doctest::Approx(aux.q).epsilon(1e-12));
  CHECK(s.prot.kappa == 1.0);
}

TEST_CASE("demand signs") {
  const LelParams p = archetype_defaults(Archetype::CryptoMining);
  LelState s = lel_init(p, 1.0);
  Rng rng(6);
  for (int k = 0; k < 20000; ++k) {
    const double v = 0.9 + 0.15 * std::sin(0.001 * k);
    const LelStepResult r = lel_step(s, v, 0.0, 1.0, 0.01, rng, p);
    s = r.state;
    CHECK(r.demand.p >= 0.0);
    CHECK(r.demand.q >= 0.0);
  }
}

TEST_CASE("current injection") {
  CHECK(lel_current_injection(0.0, 0.0, cd(1.0, 0.0), 100.0) == cd(0.0, 0.0));
  const cd a = lel_current_injection(100.0, 0.0, cd(1.0, 0.0), 100.0);
  CHECK(a.real() == doctest::Approx(1.0));
  CHECK(a.imag() == doctest::Approx(0.0));
  const cd b = lel_current_injection(0.0, 100.0, cd(1.0, 0.0), 100.0);
  CHECK(b.real() == doctest::Approx(0.0));
  CHECK(b.imag() == doctest::Approx(-1.0));
  // S = V conj(I) recovers the requested power at an arbitrary phasor.
  const cd v = std::polar(0.93, -0.4);
  const cd i = lel_current_injection(37.0, 12.0, v, 100.0);
  const cd s = v * std::conj(i) * 100.0;
  CHECK(s.real() == doctest::Approx(37.0));
  CHECK(s.imag() == doctest::Approx(12.0));
  CHECK_THROWS_AS(lel_current_injection(1.0, 0.0, cd(0.05, 0.0), 100.0), NumericalError);
  CHECK_THROWS_AS(lel_current_injection(1.0, 0.0, cd(0.0, 0.0), 100.0), NumericalError);
}

TEST_CASE("parameter file round-trip") {
  for (Archetype a : {Archetype::Datacenter, Archetype::CryptoMining, Archetype::Electrolyzer}) {
    LelParams p = allocate_demand(archetype_defaults(a), 321.123456789);
    const std::string text = serialize_lel_params(p);
    const LelParams back = parse_lel_params(text);
    CHECK(serialize_lel_params(back) == text);
    CHECK(back.archetype == a);
    CHECK(back.cool.mva_base == p.cool.mva_base);
    CHECK(back.work.p_full == p.work.p_full);
    CHECK(back.prot.r_kappa == p.prot.r_kappa);
  }
  CHECK_THROWS_AS(parse_lel_params("schema = lel-params/0\n"), ParseError);
  CHECK_THROWS_AS(parse_lel_params("this is not a parameter file"), ParseError);
}

TEST_CASE("archetype defaults give distinct pattern vectors") {
  const Archetype kinds[] = {Archetype::Datacenter, Archetype::CryptoMining, Archetype::Electrolyzer};
  // One hour of facility demand at nominal voltage, two realizations per archetype.
  std::vector<std::vector<double>> traces;
  for (Archetype a : kinds)
    for (std::uint64_t seed : {1u, 2u}) {
      const LelParams p = archetype_defaults(a);
      LelState s = lel_init(p, 1.0);
      Rng rng(seed);
      std::vector<double> out;
      for (int k = 0; k < 3600; ++k) {
        const LelStepResult r = lel_step(s, 1.0, 0.0, 1.0, 1.0, rng, p);
        s = r.state;
        out.push_back(r.demand.p);
      }
      traces.push_back(out);
    }
  std::vector<Window> pooled;
  for (const auto& t : traces) {
    const auto w = segment_windows(Trace::single("p", t, 1.0), 5, 5);
    pooled.insert(pooled.end(), w.begin(), w.end());
  }
  TclConfig cfg;
  cfg.dim = 8;
  cfg.hidden = 16;
  cfg.epochs = 5;
  const Encoder enc = train_encoder(pooled, cfg, 1);
  std::vector<PatternVector> pv;
  for (const auto& t : traces) pv.push_back(series_pattern(enc, t, 2));

  double within = 0.0;
  for (int a = 0; a < 3; ++a) within = std::max(within, pv[2 * a].squared_distance(pv[2 * a + 1]));
  double across = 1e300;
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) across = std::min(across, pv[2 * a + i].squared_distance(pv[2 * b + j]));
  CHECK(across > within);
}
