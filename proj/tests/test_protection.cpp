#include <cmath>
#include <string>

#include "doctest.h"
#include "lel/errors.h"
#include "lel/protection.h"
#include "protection_oracle.h"

using namespace lel;

namespace {

ProtectionParams example_params() {
  ProtectionParams p;
  p.v_ref = 1.0;
  p.omega_ref = 1.0;
  p.delta_v = 0.1;
  p.delta_omega = 0.005;
  p.t_delay_trip = 0.05;
  p.t_wait_recon = 0.5;
  p.t_delay_recon = 1.0;
  p.kappa_min = 0.2;
  p.kappa_max = 1.0;
  p.r_kappa = 0.5;
  return p;
}

}  // namespace

TEST_CASE("in-band operation never sheds") {
  const ProtectionParams p = example_params();
  ProtectionState s = ProtectionState::initial(p);
  for (int k = 0; k < 5000; ++k) {
    s = protection_step(s, 1.0 + 0.09 * std::sin(0.01 * k), 1.0 + 0.004 * std::cos(0.02 * k), 0.01, p);
    CHECK(s.mode == ProtectionMode::Connected);
    CHECK(s.kappa == 1.0);
  }
}

TEST_CASE("held sag trips, waits, then ramps in the predicted number of steps") {
  const ProtectionParams p = example_params();
  const double dt = 0.01;
  ProtectionState s = ProtectionState::initial(p);
  const int hold = static_cast<int>(std::lround(p.t_delay_trip / dt)) + 1;
  int tripped_at = -1;
  for (int k = 0; k < hold; ++k) {
    s = protection_step(s, p.v_ref - 2 * p.delta_v, 1.0, dt, p);
    if (tripped_at < 0 && s.mode == ProtectionMode::Shed) tripped_at = k;
  }
  CHECK(tripped_at == hold - 2);
  CHECK(s.kappa == p.kappa_min);

  int k = 0;
  while (s.mode != ProtectionMode::Ramping) {
    s = protection_step(s, 1.0, 1.0, dt, p);
    CHECK(s.kappa == p.kappa_min);
    ++k;
    REQUIRE(k < 10000);
  }
  // Released once both the in-band wait and the post-trip delay have elapsed.
  CHECK(s.since_trip_timer == doctest::Approx(p.t_delay_recon));
  CHECK(s.stable_timer >= p.t_wait_recon - 1e-9);

  int ramp_steps = 0;
  double prev = s.kappa;
  while (s.mode != ProtectionMode::Connected) {
    s = protection_step(s, 1.0, 1.0, dt, p);
    CHECK(s.kappa - prev <= p.r_kappa * dt + 1e-12);
    prev = s.kappa;
    ++ramp_steps;
    REQUIRE(ramp_steps < 10000);
  }
  CHECK(ramp_steps == static_cast<int>(std::ceil((1.0 - p.kappa_min) / (p.r_kappa * dt) - 1e-9)));
  CHECK(ramp_steps == 160);
  CHECK(s.kappa == 1.0);
}

TEST_CASE("violations shorter than the trip delay are ignored") {
  const ProtectionParams p = example_params();
  ProtectionState s = ProtectionState::initial(p);
  for (int rep = 0; rep < 50; ++rep) {
    for (int k = 0; k < 4; ++k) {
      s = protection_step(s, 0.5, 1.0, 0.01, p);
      CHECK(s.kappa == 1.0);
    }
    s = protection_step(s, 1.0, 1.0, 0.01, p);
    CHECK(s.mode == ProtectionMode::Connected);
  }
}

TEST_CASE("frequency violation alone trips") {
  const ProtectionParams p = example_params();
  ProtectionState s = ProtectionState::initial(p);
  for (int k = 0; k < 6; ++k) s = protection_step(s, 1.0, 1.01, 0.01, p);
  CHECK(s.mode == ProtectionMode::Shed);
}

TEST_CASE("re-violation while ramping holds kappa, then resumes or trips") {
  const ProtectionParams p = example_params();
  const double dt = 0.01;
  ProtectionState s = ProtectionState::initial(p);
  for (int k = 0; k < 5; ++k) s = protection_step(s, 0.5, 1.0, dt, p);
  REQUIRE(s.mode == ProtectionMode::Shed);
  while (s.mode != ProtectionMode::Ramping) s = protection_step(s, 1.0, 1.0, dt, p);
  for (int k = 0; k < 20; ++k) s = protection_step(s, 1.0, 1.0, dt, p);
  const double held = s.kappa;
  REQUIRE(held > p.kappa_min);
  s = protection_step(s, 0.5, 1.0, dt, p);
  CHECK(s.mode == ProtectionMode::ViolationTiming);
  CHECK(s.kappa == held);
  s = protection_step(s, 1.0, 1.0, dt, p);
  CHECK(s.mode == ProtectionMode::Ramping);
  for (int k = 0; k < 5; ++k) s = protection_step(s, 0.5, 1.0, dt, p);
  CHECK(s.mode == ProtectionMode::Shed);
  CHECK(s.kappa == p.kappa_min);
}

TEST_CASE("kappa_max below one caps restoration") {
  ProtectionParams p = example_params();
  p.kappa_max = 0.8;
  ProtectionState s = ProtectionState::initial(p);
  CHECK(s.kappa == 0.8);
  for (int k = 0; k < 5; ++k) s = protection_step(s, 0.5, 1.0, 0.01, p);
  for (int k = 0; k < 1000; ++k) s = protection_step(s, 1.0, 1.0, 0.01, p);
  CHECK(s.mode == ProtectionMode::Connected);
  CHECK(s.kappa == 0.8);
}

TEST_CASE("deterministic transitions") {
  const ProtectionParams p = example_params();
  Rng rng(12);
  std::vector<double> v(2000);
  for (double& x : v) x = rng.uniform() < 0.2 ? 0.7 : 1.0;
  ProtectionState a = ProtectionState::initial(p), b = a;
  for (double x : v) {
    a = protection_step(a, x, 1.0, 0.01, p);
    b = protection_step(b, x, 1.0, 0.01, p);
    CHECK(a.mode == b.mode);
    CHECK(a.kappa == b.kappa);
  }
}

TEST_CASE("randomized sequences agree with the interval-scanning oracle") {
  const testing::ScanReport rep = testing::scan_protection(2000, 77);
  INFO(rep.first_failure);
  CHECK(rep.counterexamples == 0);
}

TEST_CASE("retention scales both powers") {
  const RetainedPower same = apply_retention(1.0, 100.0, 20.0);
  CHECK(same.p == 100.0);
  CHECK(same.q == 20.0);
  const RetainedPower none = apply_retention(0.0, 100.0, 20.0);
  CHECK(none.p == 0.0);
  CHECK(none.q == 0.0);
  const RetainedPower part = apply_retention(0.3, 100.0, 20.0);
  CHECK(part.p == doctest::Approx(30.0));
  CHECK(part.q == doctest::Approx(6.0));
  CHECK_THROWS_AS(apply_retention(1.1, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(apply_retention(-0.1, 1.0, 1.0), ValidationError);
}

TEST_CASE("disclosure form") {
  ProtectionParams p = example_params();
  p.v_ref = 1.0312345678901234;
  const std::string text = serialize_protection_disclosure(p);
  const ProtectionParams back = load_protection_disclosure(text);
  CHECK(serialize_protection_disclosure(back) == text);
  CHECK(back.v_ref == p.v_ref);

  std::string missing;
  for (const auto& line : {"v_ref = 1", "omega_ref = 1", "delta_v = 0.1", "delta_omega = 0.01",
                           "t_delay_trip = 0.1", "t_wait_recon = 1", "t_delay_recon = 1", "kappa_min = 0.2",
                           "kappa_max = 1"})
    missing += std::string(line) + "\n";
  try {
    load_protection_disclosure(missing);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("r_kappa") != std::string::npos);
  }

  CHECK_THROWS_AS(load_protection_disclosure(missing + "r_kappa = 0.1\n" + "kappa_min = 0.3\n"), ParseError);
  std::string swapped = missing;
  swapped.replace(swapped.find("kappa_min = 0.2"), 15, "kappa_min = 0.9");
  swapped.replace(swapped.find("kappa_max = 1"), 13, "kappa_max = 0.5");
  CHECK_THROWS_AS(load_protection_disclosure(swapped + "r_kappa = 0.1\n"), ValidationError);
  std::string negative = missing;
  negative.replace(negative.find("t_wait_recon = 1"), 16, "t_wait_recon = -1");
  CHECK_THROWS_AS(load_protection_disclosure(negative + "r_kappa = 0.1\n"), ValidationError);
}
