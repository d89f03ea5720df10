#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lel/lel_model.h"

namespace lel {

enum class EventType {
  FaultApplied,
  FaultCleared,
  BranchTrip,
  Shed,           // protection stepped kappa down to kappa_min
  RampStart,      // reconnection released
  Reconnected,    // kappa restored to its cap
  StallTrip,
  CoolingReconnect,
  Collapse,
};

const char* to_string(EventType type);
EventType event_type_from_string(const std::string& name);

struct EventRecord {
  double t = 0.0;
  EventType type = EventType::FaultApplied;
  int lel = -1;  // index into SimResult::lels, -1 for network events
  int bus = -1;
  std::string detail;
};

struct LelSeries {
  int bus = 0;
  Archetype archetype = Archetype::Datacenter;
  ProtectionParams prot;
  std::vector<double> p;  // MW after retention
  std::vector<double> q;
  std::vector<double> kappa;
  std::vector<int> prot_mode;   // ProtectionMode as int
  std::vector<int> motor_mode;  // MotorMode as int
};

// Samples are recorded at every step, including t = 0. Collapse truncates the
// series at the last completed step.
struct SimResult {
  std::vector<double> time;
  std::vector<int> bus_ids;
  std::vector<std::vector<double>> v_mag;  // [bus][sample]
  std::vector<std::vector<double>> v_ang;
  std::vector<int> gen_bus;
  std::vector<std::vector<double>> omega;  // [generator][sample], pu
  std::vector<std::vector<double>> delta;  // rad
  std::vector<LelSeries> lels;
  std::vector<EventRecord> events;

  bool collapsed = false;
  std::string collapse_reason;
  double collapse_time = 0.0;

  std::size_t samples() const { return time.size(); }
  int bus_index(int bus_id) const;  // throws ValidationError if absent
  std::optional<double> first_event_time(EventType type) const;
};

}  // namespace lel
