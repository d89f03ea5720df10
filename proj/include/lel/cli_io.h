#pragma once

#include <string>
#include <vector>

#include "lel/grid_sim.h"
#include "lel/metrics.h"
#include "lel/sim_result.h"
#include "lel/trace.h"

namespace lel {

// Trace CSV: optional leading `# origin: ...` line, a header row `t,<channel>...`,
// then one row per sample with strictly increasing, uniformly spaced t.
// Errors name the line and column. An empty expected list accepts any channels.
Trace parse_trace(const std::string& text, const std::vector<std::string>& expected_channels = {});
Trace read_trace(const std::string& path, const std::vector<std::string>& expected_channels = {});
std::string format_trace(const Trace& trace);
void write_trace(const std::string& path, const Trace& trace);

// Wide SimResult CSV in trace form: t; v_<bus>, ang_<bus> per bus; omega_<bus>,
// delta_<bus> per generator; lel<i>_{p,q,kappa,prot,motor} per LEL. The mode
// columns hold the ProtectionMode and MotorMode enumerators as integers.
std::string sim_result_csv(const SimResult& result);

// Event log CSV: t,lel_id,bus,event_type,detail (lel_id and bus are -1 when absent;
// detail is quoted when it contains a comma or quote).
std::string event_log_csv(const std::vector<EventRecord>& events);
std::vector<EventRecord> parse_event_log(const std::string& text);

// Event schedule CSV: t,kind,bus,from,to,g,b with kind FAULT, CLEAR or BRANCH_TRIP.
// Unused cells may be empty; an empty fault admittance means a bolted fault.
EventSchedule parse_event_schedule(const std::string& text);
std::string format_event_schedule(const EventSchedule& events);

// k,voltage_nadir,frequency_overshoot,reconnection_delay,collapses ("inf" for never).
std::string sweep_csv(const std::vector<SweepRow>& rows);
// metric,value rows for dtw, max_xcorr and cosine.
std::string metric_report_csv(const MetricReport& report);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lel
