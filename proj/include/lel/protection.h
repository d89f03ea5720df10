#pragma once

#include <string>

namespace lel {

class KvDocument;

// Settings a facility discloses for its grid-interface protection.
struct ProtectionParams {
  double v_ref = 1.0;
  double omega_ref = 1.0;
  double delta_v = 0.1;
  double delta_omega = 0.01;
  double t_delay_trip = 0.1;
  double t_wait_recon = 1.0;
  double t_delay_recon = 1.0;
  double kappa_min = 0.0;
  double kappa_max = 1.0;
  double r_kappa = 0.1;

  void validate() const;
  // Level a full reconnection restores to.
  double kappa_cap() const;
};

enum class ProtectionMode { Connected, ViolationTiming, Shed, RecoveryWait, Ramping };

const char* to_string(ProtectionMode mode);

struct ProtectionState {
  ProtectionMode mode = ProtectionMode::Connected;
  double kappa = 1.0;
  double violation_timer = 0.0;
  double stable_timer = 0.0;
  double since_trip_timer = 0.0;

  static ProtectionState initial(const ProtectionParams& params);
};

bool protection_violation(double v_mag, double omega, const ProtectionParams& params);

// Advance the trip / recovery / ramp state machine by one sample. Every timer
// advances by exactly dt and thresholds compare with >=.
ProtectionState protection_step(const ProtectionState& state, double v_mag, double omega, double dt,
                                const ProtectionParams& params);

struct RetainedPower {
  double p = 0.0;
  double q = 0.0;
};

RetainedPower apply_retention(double kappa, double p_load, double q_load);

// Disclosure form: flat `key = value` text with the ten protection keys.
ProtectionParams load_protection_disclosure(const std::string& document);
std::string serialize_protection_disclosure(const ProtectionParams& params);

// Section-scoped variants used by the parameter-exchange file.
ProtectionParams protection_from_kv(const KvDocument& doc, const std::string& section);
void protection_to_kv(const ProtectionParams& params, KvDocument& doc, const std::string& section);

}  // namespace lel
