#include "lel/protection.h"

#include <algorithm>
#include <cmath>

#include "lel/errors.h"
#include "lel/kvtext.h"

namespace lel {

namespace {
constexpr double kTimerTol = 1e-9;
constexpr double kKappaTol = 1e-9;
}  // namespace

void ProtectionParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("protection: " + what); };
  if (!(kappa_min > 0.0)) fail("kappa_min must be > 0");
  if (!(kappa_min <= kappa_max)) fail("kappa_min must not exceed kappa_max");
  if (!(kappa_max <= 1.0)) fail("kappa_max must be <= 1");
  if (!(t_delay_trip >= 0.0 && t_wait_recon >= 0.0 && t_delay_recon >= 0.0))
    fail("protection times must be >= 0");
  if (!(delta_v > 0.0 && delta_omega > 0.0)) fail("delta_v and delta_omega must be > 0");
  if (!(r_kappa > 0.0)) fail("r_kappa must be > 0");
  if (!std::isfinite(v_ref) || !std::isfinite(omega_ref)) fail("references must be finite");
}

double ProtectionParams::kappa_cap() const { return std::min(kappa_max, 1.0); }

const char* to_string(ProtectionMode mode) {
  switch (mode) {
    case ProtectionMode::Connected: return "CONNECTED";
    case ProtectionMode::ViolationTiming: return "VIOLATION_TIMING";
    case ProtectionMode::Shed: return "SHED";
    case ProtectionMode::RecoveryWait: return "RECOVERY_WAIT";
    case ProtectionMode::Ramping: return "RAMPING";
  }
  return "?";
}

ProtectionState ProtectionState::initial(const ProtectionParams& params) {
  ProtectionState s;
  s.kappa = params.kappa_cap();
  return s;
}

bool protection_violation(double v_mag, double omega, const ProtectionParams& params) {
  return std::abs(v_mag - params.v_ref) > params.delta_v ||
         std::abs(omega - params.omega_ref) > params.delta_omega;
}

ProtectionState protection_step(const ProtectionState& state, double v_mag, double omega, double dt,
                                const ProtectionParams& params) {
  const bool violated = protection_violation(v_mag, omega, params);
  const double cap = params.kappa_cap();
  ProtectionState s = state;

  auto trip = [&] {
    s.mode = ProtectionMode::Shed;
    s.kappa = params.kappa_min;
    s.violation_timer = 0.0;
    s.stable_timer = 0.0;
    s.since_trip_timer = 0.0;
  };
  auto ramp = [&] {
    s.mode = ProtectionMode::Ramping;
    s.kappa = std::min(s.kappa + params.r_kappa * dt, cap);
    if (s.kappa >= cap - kKappaTol) {
      s.kappa = cap;
      s.mode = ProtectionMode::Connected;
      s.stable_timer = 0.0;
    }
  };
  auto start_timing = [&] {
    s.mode = ProtectionMode::ViolationTiming;
    s.violation_timer = dt;
    if (s.violation_timer >= params.t_delay_trip - kTimerTol) trip();
  };

  switch (state.mode) {
    case ProtectionMode::Connected:
      if (violated) start_timing();
      break;

    case ProtectionMode::ViolationTiming:
      if (violated) {
        s.violation_timer += dt;
        if (s.violation_timer >= params.t_delay_trip - kTimerTol) trip();
      } else {
        s.violation_timer = 0.0;
        // Back to whatever was interrupted: steady service or an unfinished ramp.
        if (s.kappa >= cap - kKappaTol)
          s.mode = ProtectionMode::Connected;
        else
          ramp();
      }
      break;

    case ProtectionMode::Shed:
      s.since_trip_timer += dt;
      if (!violated) {
        s.mode = ProtectionMode::RecoveryWait;
        s.stable_timer = dt;
      }
      break;

    case ProtectionMode::RecoveryWait:
      s.since_trip_timer += dt;
      if (violated) {
        s.mode = ProtectionMode::Shed;
        s.stable_timer = 0.0;
      } else {
        s.stable_timer += dt;
      }
      break;

    case ProtectionMode::Ramping:
      s.since_trip_timer += dt;
      if (violated) {
        start_timing();
      } else {
        ramp();
      }
      break;
  }

  if (s.mode == ProtectionMode::RecoveryWait && s.stable_timer >= params.t_wait_recon - kTimerTol &&
      s.since_trip_timer >= params.t_delay_recon - kTimerTol) {
    s.mode = ProtectionMode::Ramping;
  }
  return s;
}

RetainedPower apply_retention(double kappa, double p_load, double q_load) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ValidationError("apply_retention: kappa outside [0,1]");
  return {kappa * p_load, kappa * q_load};
}

namespace {
const char* const kKeys[] = {"v_ref",        "omega_ref",     "delta_v",   "delta_omega", "t_delay_trip",
                             "t_wait_recon", "t_delay_recon", "kappa_min", "kappa_max",   "r_kappa"};

double* field(ProtectionParams& p, int i) {
  double* fields[] = {&p.v_ref,        &p.omega_ref,     &p.delta_v,   &p.delta_omega, &p.t_delay_trip,
                      &p.t_wait_recon, &p.t_delay_recon, &p.kappa_min, &p.kappa_max,   &p.r_kappa};
  return fields[i];
}
}  // namespace

ProtectionParams protection_from_kv(const KvDocument& doc, const std::string& section) {
  ProtectionParams p;
  for (int i = 0; i < 10; ++i) *field(p, i) = doc.number(section, kKeys[i]);
  p.validate();
  return p;
}

void protection_to_kv(const ProtectionParams& params, KvDocument& doc, const std::string& section) {
  ProtectionParams copy = params;
  for (int i = 0; i < 10; ++i) doc.set(section, kKeys[i], *field(copy, i));
}

ProtectionParams load_protection_disclosure(const std::string& document) {
  return protection_from_kv(KvDocument::parse(document), "");
}

std::string serialize_protection_disclosure(const ProtectionParams& params) {
  KvDocument doc;
  protection_to_kv(params, doc, "");
  return doc.serialize();
}

}  // namespace lel
