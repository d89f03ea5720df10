#include "lel/sim_result.h"

#include <array>

#include "lel/errors.h"

namespace lel {

namespace {

constexpr std::array<std::pair<EventType, const char*>, 9> kNames{{
    {EventType::FaultApplied, "FAULT_APPLIED"},
    {EventType::FaultCleared, "FAULT_CLEARED"},
    {EventType::BranchTrip, "BRANCH_TRIP"},
    {EventType::Shed, "SHED"},
    {EventType::RampStart, "RAMP_START"},
    {EventType::Reconnected, "RECONNECTED"},
    {EventType::StallTrip, "STALL_TRIP"},
    {EventType::CoolingReconnect, "COOLING_RECONNECT"},
    {EventType::Collapse, "COLLAPSE"},
}};

}  // namespace

const char* to_string(EventType type) {
  for (const auto& [t, name] : kNames)
    if (t == type) return name;
  return "?";
}

EventType event_type_from_string(const std::string& name) {
  for (const auto& [t, n] : kNames)
    if (name == n) return t;
  throw ParseError("unknown event type '" + name + "'");
}

int SimResult::bus_index(int bus_id) const {
  for (std::size_t i = 0; i < bus_ids.size(); ++i)
    if (bus_ids[i] == bus_id) return static_cast<int>(i);
  throw ValidationError("bus " + std::to_string(bus_id) + " not in result");
}

std::optional<double> SimResult::first_event_time(EventType type) const {
  for (const EventRecord& e : events)
    if (e.type == type) return e.t;
  return std::nullopt;
}

}  // namespace lel
