#include "lel/cli_io.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lel/errors.h"
#include "lel/kvtext.h"

namespace lel {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

// Splits one CSV line, honouring double-quoted cells.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cell : trim(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell += c;
    }
  }
  out.push_back(was_quoted ? cell : trim(cell));
  return out;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string where(int line, const std::string& column) {
  return "line " + std::to_string(line) + (column.empty() ? "" : " column '" + column + "'");
}

double to_number(const std::string& s, int line, const std::string& column) {
  double v = 0.0;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(where(line, column) + ": '" + s + "' is not a number");
  if (std::isnan(v)) throw ParseError(where(line, column) + ": NaN");
  return v;
}

int to_int(const std::string& s, int line, const std::string& column) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(where(line, column) + ": '" + s + "' is not an integer");
  return v;
}

std::string num(double v) { return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : format_double(v); }

struct Lines {
  std::vector<std::pair<int, std::string>> rows;  // (1-based line number, text)
};

Lines lines_of(const std::string& text) {
  Lines l;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) l.rows.emplace_back(n, line);
  }
  return l;
}

void expect_header(const std::pair<int, std::string>& row, const std::vector<std::string>& header,
                   const std::string& what) {
  const auto cells = split_csv(row.second);
  if (cells != header) {
    std::string h;
    for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
    throw ParseError(what + " " + where(row.first, "") + ": header must be '" + h + "'");
  }
}

}  // namespace

Trace parse_trace(const std::string& text, const std::vector<std::string>& expected_channels) {
  const Lines l = lines_of(text);
  Trace tr;
  std::size_t i = 0;
  for (; i < l.rows.size() && l.rows[i].second.rfind('#', 0) == 0; ++i) {
    const std::string body = trim(l.rows[i].second.substr(1));
    if (body.rfind("origin:", 0) == 0) tr.origin = trim(body.substr(7));
  }
  if (i == l.rows.size()) throw ParseError("trace: no header row");
  const int header_line = l.rows[i].first;
  const auto header = split_csv(l.rows[i].second);
  if (header.empty() || header[0] != "t") throw ParseError("trace " + where(header_line, "") + ": first column must be 't'");
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) throw ParseError("trace " + where(header_line, "") + ": empty channel name");
    for (std::size_t d = 1; d < c; ++d)
      if (header[d] == header[c]) throw ParseError("trace " + where(header_line, "") + ": duplicate channel '" + header[c] + "'");
    tr.channels.push_back({header[c], {}});
  }
  for (const auto& name : expected_channels)
    if (!tr.has_channel(name)) throw ParseError("trace: missing channel '" + name + "'");

  std::vector<double> t;
  std::vector<int> line_of;
  for (++i; i < l.rows.size(); ++i) {
    const auto& [n, text_line] = l.rows[i];
    const auto cells = split_csv(text_line);
    if (cells.size() != header.size())
      throw ParseError("trace " + where(n, "") + ": expected " + std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    t.push_back(to_number(cells[0], n, "t"));
    if (!std::isfinite(t.back())) throw ParseError("trace " + where(n, "t") + ": not finite");
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = to_number(cells[c], n, header[c]);
      if (!std::isfinite(v)) throw ParseError("trace " + where(n, header[c]) + ": not finite");
      tr.channels[c - 1].values.push_back(v);
    }
    if (t.size() > 1 && !(t.back() > t[t.size() - 2]))
      throw ParseError("trace " + where(n, "t") + ": time is not strictly increasing");
    line_of.push_back(n);
  }
  if (t.size() < 2) throw ParseError("trace: need at least two rows to infer the sample period");
  tr.t0 = t.front();
  tr.sample_period = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double step = t[k] - t[k - 1];
    if (std::abs(step - tr.sample_period) > 1e-9 * std::max(tr.sample_period, std::abs(t[k])))
      throw ParseError("trace " + where(line_of[k], "t") + ": non-uniform sampling");
  }
  tr.validate();
  return tr;
}

Trace read_trace(const std::string& path, const std::vector<std::string>& expected_channels) {
  try {
    Trace t = parse_trace(read_text_file(path), expected_channels);
    if (t.origin.empty()) t.origin = path;
    return t;
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string format_trace(const Trace& trace) {
  trace.validate();
  std::string out;
  if (!trace.origin.empty()) out += "# origin: " + trace.origin + "\n";
  out += "t";
  for (const auto& c : trace.channels) out += "," + c.name;
  out += "\n";
  for (std::size_t k = 0; k < trace.length(); ++k) {
    out += num(trace.t0 + static_cast<double>(k) * trace.sample_period);
    for (const auto& c : trace.channels) out += "," + num(c.values[k]);
    out += "\n";
  }
  return out;
}

void write_trace(const std::string& path, const Trace& trace) { write_text_file(path, format_trace(trace)); }

std::string sim_result_csv(const SimResult& r) {
  Trace t;
  t.sample_period = r.samples() > 1 ? r.time[1] - r.time[0] : 1.0;
  t.t0 = r.time.empty() ? 0.0 : r.time.front();
  auto add = [&](std::string name, const std::vector<double>& v) { t.channels.push_back({std::move(name), v}); };
  auto add_int = [&](std::string name, const std::vector<int>& v) {
    t.channels.push_back({std::move(name), std::vector<double>(v.begin(), v.end())});
  };
  for (std::size_t i = 0; i < r.bus_ids.size(); ++i) {
    add("v_" + std::to_string(r.bus_ids[i]), r.v_mag[i]);
    add("ang_" + std::to_string(r.bus_ids[i]), r.v_ang[i]);
  }
  for (std::size_t g = 0; g < r.gen_bus.size(); ++g) {
    add("omega_" + std::to_string(r.gen_bus[g]), r.omega[g]);
    add("delta_" + std::to_string(r.gen_bus[g]), r.delta[g]);
  }
  for (std::size_t l = 0; l < r.lels.size(); ++l) {
    const std::string p = "lel" + std::to_string(l) + "_";
    add(p + "p", r.lels[l].p);
    add(p + "q", r.lels[l].q);
    add(p + "kappa", r.lels[l].kappa);
    add_int(p + "prot", r.lels[l].prot_mode);
    add_int(p + "motor", r.lels[l].motor_mode);
  }
  // Time is written from the recorded samples rather than t0 + k dt.
  std::string out = "t";
  for (const auto& c : t.channels) out += "," + c.name;
  out += "\n";
  for (std::size_t k = 0; k < r.samples(); ++k) {
    out += num(r.time[k]);
    for (const auto& c : t.channels) out += "," + num(c.values.at(k));
    out += "\n";
  }
  return out;
}

std::string event_log_csv(const std::vector<EventRecord>& events) {
  std::string out = "t,lel_id,bus,event_type,detail\n";
  for (const auto& e : events)
    out += num(e.t) + "," + std::to_string(e.lel) + "," + std::to_string(e.bus) + "," + to_string(e.type) + "," +
           quote(e.detail) + "\n";
  return out;
}

std::vector<EventRecord> parse_event_log(const std::string& text) {
  const Lines l = lines_of(text);
  if (l.rows.empty()) throw ParseError("event log: empty");
  expect_header(l.rows[0], {"t", "lel_id", "bus", "event_type", "detail"}, "event log");
  std::vector<EventRecord> out;
  for (std::size_t i = 1; i < l.rows.size(); ++i) {
    const auto& [n, line] = l.rows[i];
    const auto c = split_csv(line);
    if (c.size() != 5) throw ParseError("event log " + where(n, "") + ": expected 5 cells");
    EventRecord e;
    e.t = to_number(c[0], n, "t");
    e.lel = to_int(c[1], n, "lel_id");
    e.bus = to_int(c[2], n, "bus");
    try {
      e.type = event_type_from_string(c[3]);
    } catch (const ValidationError& err) {
      throw ParseError("event log " + where(n, "event_type") + ": " + err.what());
    }
    e.detail = c[4];
    out.push_back(std::move(e));
  }
  return out;
}

EventSchedule parse_event_schedule(const std::string& text) {
  const Lines l = lines_of(text);
  std::size_t i = 0;
  while (i < l.rows.size() && l.rows[i].second.rfind('#', 0) == 0) ++i;
  if (i == l.rows.size()) throw ParseError("event schedule: no header row");
  expect_header(l.rows[i], {"t", "kind", "bus", "from", "to", "g", "b"}, "event schedule");
  EventSchedule out;
  for (++i; i < l.rows.size(); ++i) {
    const auto& [n, line] = l.rows[i];
    if (line.rfind('#', 0) == 0) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw ParseError("event schedule " + where(n, "") + ": expected 7 cells");
    GridEvent e;
    e.t = to_number(c[0], n, "t");
    if (!(e.t >= 0.0) || !std::isfinite(e.t)) throw ParseError("event schedule " + where(n, "t") + ": must be finite and >= 0");
    auto need = [&](std::size_t col, const char* name) {
      if (c[col].empty()) throw ParseError("event schedule " + where(n, name) + ": required for " + c[1]);
      return to_int(c[col], n, name);
    };
    if (c[1] == "FAULT" || c[1] == "CLEAR") {
      e.kind = c[1] == "FAULT" ? GridEvent::Kind::Fault : GridEvent::Kind::Clear;
      e.bus = need(2, "bus");
      if (!c[5].empty() || !c[6].empty())
        e.y_fault = {c[5].empty() ? 0.0 : to_number(c[5], n, "g"), c[6].empty() ? 0.0 : to_number(c[6], n, "b")};
    } else if (c[1] == "BRANCH_TRIP") {
      e.kind = GridEvent::Kind::BranchTrip;
      e.from = need(3, "from");
      e.to = need(4, "to");
    } else {
      throw ParseError("event schedule " + where(n, "kind") + ": expected FAULT, CLEAR or BRANCH_TRIP, got '" + c[1] + "'");
    }
    out.push_back(e);
  }
  return out;
}

std::string format_event_schedule(const EventSchedule& events) {
  std::string out = "t,kind,bus,from,to,g,b\n";
  for (const auto& e : events) {
    out += num(e.t) + ",";
    switch (e.kind) {
      case GridEvent::Kind::Fault:
      case GridEvent::Kind::Clear:
        out += std::string(e.kind == GridEvent::Kind::Fault ? "FAULT" : "CLEAR") + "," + std::to_string(e.bus) +
               ",,," + num(e.y_fault.real()) + "," + num(e.y_fault.imag()) + "\n";
        break;
      case GridEvent::Kind::BranchTrip:
        out += "BRANCH_TRIP,," + std::to_string(e.from) + "," + std::to_string(e.to) + ",,\n";
        break;
    }
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "k,voltage_nadir,frequency_overshoot,reconnection_delay,collapses\n";
  for (const auto& r : rows)
    out += std::to_string(r.k) + "," + num(r.voltage_nadir) + "," + num(r.frequency_overshoot) + "," +
           num(r.reconnection_delay) + "," + std::to_string(r.collapses) + "\n";
  return out;
}

std::string metric_report_csv(const MetricReport& r) {
  return "metric,value\ndtw," + num(r.dtw) + "\nmax_xcorr," + num(r.max_xcorr) + "\ncosine," + num(r.cosine) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
  if (!f) throw ValidationError("write failed: " + path);
}

}  // namespace lel
