#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "lel/grid_sim.h"

namespace lel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Row {
  int line = 0;
  std::vector<std::string> cells;
};

struct Section {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

const std::map<std::string, std::vector<std::string>>& expected_headers() {
  static const std::map<std::string, std::vector<std::string>> h{
      {"CASE", {"s_base", "f_base"}},
      {"BUS", {"id", "type", "v_set", "p_load", "q_load", "g_sh", "b_sh"}},
      {"BRANCH", {"from", "to", "r", "x", "b", "tap"}},
      {"GEN", {"bus", "h", "d", "xd_p", "p_set", "v_set"}},
      {"LEL", {"bus", "archetype", "param_file"}},
  };
  return h;
}

class RowReader {
 public:
  RowReader(const std::string& section, const Row& row) : section_(section), row_(row) {}

  double number(std::size_t col) const {
    const std::string& s = cell(col);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) fail(col, "not a number");
    return v;
  }

  int integer(std::size_t col) const {
    const std::string& s = cell(col);
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(col, "not an integer");
    return v;
  }

  const std::string& cell(std::size_t col) const { return row_.cells.at(col); }

  [[noreturn]] void fail(std::size_t col, const std::string& what) const {
    throw ParseError("case line " + std::to_string(row_.line) + " [" + section_ + "] column '" +
                     expected_headers().at(section_)[col] + "': " + what + " ('" + row_.cells[col] + "')");
  }

 private:
  std::string section_;
  const Row& row_;
};

}  // namespace

int GridCase::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  throw ValidationError("case: no bus with id " + std::to_string(id));
}

void GridCase::validate() const {
  if (!(s_base > 0.0 && f_base > 0.0)) throw ValidationError("case: s_base and f_base must be > 0");
  if (buses.empty()) throw ValidationError("case: no buses");
  std::set<int> ids;
  int slack = 0;
  for (const Bus& b : buses) {
    if (!ids.insert(b.id).second) throw ValidationError("case: duplicate bus id " + std::to_string(b.id));
    if (b.type == BusType::Slack) ++slack;
    if (!(b.v_set > 0.0)) throw ValidationError("case: bus " + std::to_string(b.id) + " v_set must be > 0");
  }
  if (slack != 1) throw ValidationError("case: expected exactly one slack bus, found " + std::to_string(slack));

  for (const Branch& br : branches) {
    bus_index(br.from);
    bus_index(br.to);
    if (br.from == br.to) throw ValidationError("case: branch connects bus " + std::to_string(br.from) + " to itself");
    if (!(br.tap > 0.0)) throw ValidationError("case: branch tap must be > 0");
  }

  std::set<int> gen_buses;
  for (const Generator& g : generators) {
    const Bus& b = buses[static_cast<std::size_t>(bus_index(g.bus))];
    if (b.type == BusType::PQ) throw ValidationError("case: generator on PQ bus " + std::to_string(g.bus));
    if (!gen_buses.insert(g.bus).second)
      throw ValidationError("case: more than one generator on bus " + std::to_string(g.bus));
    if (!(g.h > 0.0 && g.xd_p > 0.0 && g.d >= 0.0))
      throw ValidationError("case: generator at bus " + std::to_string(g.bus) + " needs h > 0, xd_p > 0, d >= 0");
  }
  for (const Bus& b : buses)
    if (b.type != BusType::PQ && !gen_buses.count(b.id))
      throw ValidationError("case: bus " + std::to_string(b.id) + " is PV/slack but has no generator");

  std::set<int> lel_buses;
  for (const LelPlacement& l : lels) {
    const Bus& b = buses[static_cast<std::size_t>(bus_index(l.bus))];
    if (b.type != BusType::PQ) throw ValidationError("case: LEL on non-PQ bus " + std::to_string(l.bus));
    if (!lel_buses.insert(l.bus).second)
      throw ValidationError("case: more than one LEL on bus " + std::to_string(l.bus));
    l.params.validate();
  }

  // Connectivity from the slack bus.
  std::vector<std::vector<int>> adj(buses.size());
  for (const Branch& br : branches) {
    const int a = bus_index(br.from), c = bus_index(br.to);
    adj[a].push_back(c);
    adj[c].push_back(a);
  }
  std::vector<bool> seen(buses.size(), false);
  std::queue<int> q;
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].type == BusType::Slack) {
      q.push(static_cast<int>(i));
      seen[i] = true;
    }
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        q.push(v);
      }
  }
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (!seen[i])
      throw ValidationError("case: disconnected network, bus " + std::to_string(buses[i].id) +
                            " is unreachable from the slack bus");
}

GridCase load_case(const std::string& document, const std::string& base_dir) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(document);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("case line " + std::to_string(lineno) + ": bad section header");
      current = trim(line.substr(1, line.size() - 2));
      if (!expected_headers().count(current))
        throw ParseError("case line " + std::to_string(lineno) + ": unknown section [" + current + "]");
      if (sections.count(current))
        throw ParseError("case line " + std::to_string(lineno) + ": repeated section [" + current + "]");
      sections[current];
      continue;
    }
    if (current.empty()) throw ParseError("case line " + std::to_string(lineno) + ": data before any section");
    Section& sec = sections[current];
    const auto cells = split_csv(line);
    if (sec.header.empty()) {
      if (cells != expected_headers().at(current))
        throw ParseError("case line " + std::to_string(lineno) + ": [" + current + "] header must be '" + [&] {
          std::string h;
          for (const auto& c : expected_headers().at(current)) h += (h.empty() ? "" : ",") + c;
          return h;
        }() + "'");
      sec.header = cells;
      continue;
    }
    if (cells.size() != sec.header.size())
      throw ParseError("case line " + std::to_string(lineno) + ": expected " + std::to_string(sec.header.size()) +
                       " columns in [" + current + "], got " + std::to_string(cells.size()));
    sec.rows.push_back({lineno, cells});
  }
  for (const char* required : {"CASE", "BUS", "BRANCH", "GEN"})
    if (!sections.count(required)) throw ParseError(std::string("case: missing section [") + required + "]");

  GridCase g;
  const Section& cs = sections["CASE"];
  if (cs.rows.size() != 1) throw ParseError("case: [CASE] needs exactly one data row");
  {
    RowReader r("CASE", cs.rows[0]);
    g.s_base = r.number(0);
    g.f_base = r.number(1);
  }
  for (const Row& row : sections["BUS"].rows) {
    RowReader r("BUS", row);
    Bus b;
    b.id = r.integer(0);
    const std::string& t = r.cell(1);
    if (t == "SLACK")
      b.type = BusType::Slack;
    else if (t == "PV")
      b.type = BusType::PV;
    else if (t == "PQ")
      b.type = BusType::PQ;
    else
      r.fail(1, "expected SLACK, PV or PQ");
    b.v_set = r.number(2);
    b.p_load = r.number(3);
    b.q_load = r.number(4);
    b.g_sh = r.number(5);
    b.b_sh = r.number(6);
    g.buses.push_back(b);
  }
  for (const Row& row : sections["BRANCH"].rows) {
    RowReader r("BRANCH", row);
    g.branches.push_back({r.integer(0), r.integer(1), r.number(2), r.number(3), r.number(4), r.number(5)});
  }
  for (const Row& row : sections["GEN"].rows) {
    RowReader r("GEN", row);
    g.generators.push_back({r.integer(0), r.number(1), r.number(2), r.number(3), r.number(4), r.number(5)});
  }
  if (sections.count("LEL"))
    for (const Row& row : sections["LEL"].rows) {
      RowReader r("LEL", row);
      LelPlacement p;
      p.bus = r.integer(0);
      const std::string& file = r.cell(2);
      if (file.empty()) {
        try {
          p.params = archetype_defaults(archetype_from_string(r.cell(1)));
        } catch (const ValidationError& e) {
          r.fail(1, e.what());
        }
        p.size_to_bus = true;
      } else {
        const std::filesystem::path path = std::filesystem::path(base_dir) / file;
        std::ifstream f(path);
        if (!f) r.fail(2, "cannot open parameter file " + path.string());
        std::stringstream ss;
        ss << f.rdbuf();
        p.params = parse_lel_params(ss.str());
        if (!r.cell(1).empty() && archetype_from_string(r.cell(1)) != p.params.archetype)
          r.fail(1, "archetype disagrees with the parameter file");
        p.size_to_bus = false;
      }
      g.lels.push_back(p);
    }
  g.validate();
  return g;
}

GridCase load_case_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open case file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_case(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::vector<int> eligible_lel_buses(const GridCase& grid) {
  std::vector<int> out;
  for (const Bus& b : grid.buses)
    if (b.type == BusType::PQ && b.p_load > 0.0) out.push_back(b.id);
  return out;
}

CMatrix build_ybus(const GridCase& grid, const std::vector<bool>* in_service) {
  const auto n = static_cast<long>(grid.buses.size());
  CMatrix y = CMatrix::Zero(n, n);
  for (long i = 0; i < n; ++i) y(i, i) += std::complex<double>(grid.buses[i].g_sh, grid.buses[i].b_sh);
  for (std::size_t k = 0; k < grid.branches.size(); ++k) {
    if (in_service && !(*in_service)[k]) continue;
    const Branch& br = grid.branches[k];
    const std::complex<double> z(br.r, br.x);
    if (std::abs(z) == 0.0)
      throw ValidationError("build_ybus: zero-impedance branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to));
    const std::complex<double> ys = 1.0 / z;
    const std::complex<double> bc(0.0, br.b / 2.0);
    const int f = grid.bus_index(br.from), t = grid.bus_index(br.to);
    y(f, f) += (ys + bc) / (br.tap * br.tap);
    y(t, t) += ys + bc;
    y(f, t) -= ys / br.tap;
    y(t, f) -= ys / br.tap;
  }
  return y;
}

PowerFlowResult power_flow(const GridCase& grid, int max_iterations, double tolerance) {
  grid.validate();
  const CMatrix y = build_ybus(grid);
  const auto n = static_cast<long>(grid.buses.size());

  Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p_spec(n), q_spec(n);
  for (long i = 0; i < n; ++i) {
    p_spec(i) = -grid.buses[i].p_load;
    q_spec(i) = -grid.buses[i].q_load;
  }
  for (const Generator& g : grid.generators) {
    const int i = grid.bus_index(g.bus);
    p_spec(i) += g.p_set;
    vm(i) = g.v_set;
  }
  // Unknown angles: all but slack; unknown magnitudes: PQ buses.
  std::vector<long> ang, mag;
  for (long i = 0; i < n; ++i) {
    if (grid.buses[i].type != BusType::Slack) ang.push_back(i);
    if (grid.buses[i].type == BusType::PQ) mag.push_back(i);
  }
  const long na = static_cast<long>(ang.size()), nm = static_cast<long>(mag.size());

  PowerFlowResult res;
  auto voltages = [&] {
    CVector v(n);
    for (long i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
    return v;
  };
  for (int it = 0;; ++it) {
    const CVector v = voltages();
    const CVector i_bus = y * v;
    const CVector s = v.cwiseProduct(i_bus.conjugate());
    Eigen::VectorXd mis(na + nm);
    for (long k = 0; k < na; ++k) mis(k) = p_spec(ang[k]) - s(ang[k]).real();
    for (long k = 0; k < nm; ++k) mis(na + k) = q_spec(mag[k]) - s(mag[k]).imag();
    res.mismatch = mis.size() ? mis.cwiseAbs().maxCoeff() : 0.0;
    res.iterations = it;
    if (!std::isfinite(res.mismatch)) break;
    if (res.mismatch < tolerance) {
      res.v = v;
      res.s_gen = s;
      for (long i = 0; i < n; ++i) res.s_gen(i) += std::complex<double>(grid.buses[i].p_load, grid.buses[i].q_load);
      return res;
    }
    if (it >= max_iterations) break;

    // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
    const CVector vn = v.cwiseQuotient(v.cwiseAbs().cast<std::complex<double>>());
    const CMatrix dva = std::complex<double>(0.0, 1.0) * v.asDiagonal() *
                        (CMatrix(i_bus.asDiagonal()) - y * v.asDiagonal()).conjugate();
    const CMatrix dvm =
        v.asDiagonal() * (y * vn.asDiagonal()).conjugate() + CMatrix(i_bus.conjugate().asDiagonal()) * vn.asDiagonal();
    Eigen::MatrixXd j(na + nm, na + nm);
    for (long r = 0; r < na; ++r) {
      for (long c = 0; c < na; ++c) j(r, c) = dva(ang[r], ang[c]).real();
      for (long c = 0; c < nm; ++c) j(r, na + c) = dvm(ang[r], mag[c]).real();
    }
    for (long r = 0; r < nm; ++r) {
      for (long c = 0; c < na; ++c) j(na + r, c) = dva(mag[r], ang[c]).imag();
      for (long c = 0; c < nm; ++c) j(na + r, na + c) = dvm(mag[r], mag[c]).imag();
    }
    const Eigen::VectorXd dx = j.partialPivLu().solve(mis);
    for (long k = 0; k < na; ++k) va(ang[k]) += dx(k);
    for (long k = 0; k < nm; ++k) vm(mag[k]) += dx(na + k);
  }
  throw ConvergenceError("power flow did not converge after " + std::to_string(res.iterations) +
                             " iterations; max mismatch " + std::to_string(res.mismatch) + " pu",
                         res.iterations, res.mismatch);
}

EventSchedule fault_schedule(int fault_bus, double t_fault, double clear_after) {
  GridEvent on;
  on.t = t_fault;
  on.kind = GridEvent::Kind::Fault;
  on.bus = fault_bus;
  GridEvent off = on;
  off.t = t_fault + clear_after;
  off.kind = GridEvent::Kind::Clear;
  return {on, off};
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ValidationError("sim: dt must be > 0");
  if (!(horizon > 0.0)) throw ValidationError("sim: horizon must be > 0");
  if (!(newton_tol > 0.0) || newton_max_iter < 1) throw ValidationError("sim: bad Newton settings");
}

}  // namespace lel
