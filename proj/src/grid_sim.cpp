#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "lel/grid_sim.h"

namespace lel {

namespace {

using cd = std::complex<double>;
constexpr cd kJ{0.0, 1.0};

struct LelSlot {
  LelParams params;
  int bus = 0;  // bus index
  int source = 0;  // generator index
  LelState init;
};

// Nearest generator to every bus by shortest |z| path.
std::vector<int> nearest_generator(const GridCase& grid) {
  const std::size_t n = grid.buses.size();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const Branch& br : grid.branches) {
    const int a = grid.bus_index(br.from), b = grid.bus_index(br.to);
    const double w = std::abs(cd(br.r, br.x));
    adj[a].push_back({b, w});
    adj[b].push_back({a, w});
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> owner(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    const int b = grid.bus_index(grid.generators[g].bus);
    dist[b] = 0.0;
    owner[b] = static_cast<int>(g);
    pq.push({0.0, b});
  }
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, w] : adj[u])
      if (d + w < dist[v]) {
        dist[v] = d + w;
        owner[v] = owner[u];
        pq.push({dist[v], v});
      }
  }
  return owner;
}

}  // namespace

struct GridSimulator::Impl {
  GridCase grid;
  SimConfig cfg;
  PowerFlowResult pf;
  std::vector<LelSlot> lels;
  std::vector<int> gen_bus;  // bus index per generator
  std::vector<double> e_mag, p_mech, delta0;
  CVector y_static;  // constant-admittance loads and LEL compensation, per bus
  int n_bus = 0, n_gen = 0, n_lel = 0;

  Impl(GridCase g, SimConfig c);

  int n_diff() const { return 2 * n_gen + 3 * n_lel; }
  int n_state() const { return n_diff() + 2 * n_bus; }
  int i_delta(int g) const { return g; }
  int i_omega(int g) const { return n_gen + g; }
  int i_motor(int l) const { return 2 * n_gen + 3 * l; }
  int i_vre(int b) const { return n_diff() + b; }
  int i_vim(int b) const { return n_diff() + n_bus + b; }

  cd voltage(const Eigen::VectorXd& x, int b) const { return {x(i_vre(b)), x(i_vim(b))}; }

  MotorState motor_at(const Eigen::VectorXd& x, const std::vector<LelState>& disc, int l) const {
    MotorState m = disc[l].motor;
    m.ed_p = x(i_motor(l));
    m.eq_p = x(i_motor(l) + 1);
    m.slip = x(i_motor(l) + 2);
    return m;
  }

  CMatrix network(const std::vector<bool>& in_service, const std::vector<cd>& fault) const {
    CMatrix y = build_ybus(grid, &in_service);
    for (int b = 0; b < n_bus; ++b) y(b, b) += y_static(b) + fault[b];
    for (int g = 0; g < n_gen; ++g) y(gen_bus[g], gen_bus[g]) += 1.0 / (kJ * grid.generators[g].xd_p);
    return y;
  }

  cd lel_current(const Eigen::VectorXd& x, const std::vector<LelState>& disc, int l) const {
    const LelSlot& s = lels[l];
    const LelParams& p = s.params;
    const cd v = voltage(x, s.bus);
    const double vm = std::abs(v);
    const PowerPQ aux = aux_power(vm, p.aux);
    const cd sp = cd(workload_power(disc[l].work.eta, p.work) + aux.p, aux.q) / grid.s_base;
    // Constant power above the floor, the equivalent admittance at the floor below it.
    const cd i_cp = vm > kLowVoltageFloor ? std::conj(sp / v)
                                          : std::conj(sp) * v / (kLowVoltageFloor * kLowVoltageFloor);
    const cd i_m = motor_current(motor_at(x, disc, l), v.real(), v.imag(), p.cool) * p.cool.mva_base / grid.s_base;
    return disc[l].prot.kappa * (i_cp + i_m);
  }

  // Differential right-hand side.
  void derivatives(const Eigen::VectorXd& x, const std::vector<LelState>& disc, Eigen::VectorXd& f) const {
    const double wb = 2.0 * std::numbers::pi * grid.f_base;
    for (int g = 0; g < n_gen; ++g) {
      const Generator& gen = grid.generators[g];
      const cd e = std::polar(e_mag[g], x(i_delta(g)));
      const cd i = (e - voltage(x, gen_bus[g])) / (kJ * gen.xd_p);
      const double pe = std::real(e * std::conj(i));
      const double dw = x(i_omega(g)) - 1.0;
      f(i_delta(g)) = wb * dw;
      f(i_omega(g)) = (p_mech[g] - pe - gen.d * dw) / (2.0 * gen.h);
    }
    for (int l = 0; l < n_lel; ++l) {
      const cd v = voltage(x, lels[l].bus);
      const MotorDerivatives d = motor_derivatives(motor_at(x, disc, l), v.real(), v.imag(), lels[l].params.cool);
      f(i_motor(l)) = d.ded_p;
      f(i_motor(l) + 1) = d.deq_p;
      f(i_motor(l) + 2) = d.dslip;
    }
  }

  // Network current balance Y V - I_gen + I_lel, split into real and imaginary rows.
  void algebraic(const Eigen::VectorXd& x, const std::vector<LelState>& disc, const CMatrix& y,
                 double* out) const {
    CVector v(n_bus);
    for (int b = 0; b < n_bus; ++b) v(b) = voltage(x, b);
    CVector r = y * v;
    for (int g = 0; g < n_gen; ++g)
      r(gen_bus[g]) -= std::polar(e_mag[g], x(i_delta(g))) / (kJ * grid.generators[g].xd_p);
    for (int l = 0; l < n_lel; ++l) r(lels[l].bus) += lel_current(x, disc, l);
    for (int b = 0; b < n_bus; ++b) {
      out[b] = r(b).real();
      out[n_bus + b] = r(b).imag();
    }
  }
};

GridSimulator::Impl::Impl(GridCase g, SimConfig c) : grid(std::move(g)), cfg(c) {
  grid.validate();
  cfg.validate();
  n_bus = static_cast<int>(grid.buses.size());
  n_gen = static_cast<int>(grid.generators.size());
  n_lel = static_cast<int>(grid.lels.size());
  if (n_gen == 0) throw ValidationError("grid: at least one generator is required");

  // Fixed-size facilities replace their bus load by their own demand; iterate the
  // power flow until that demand is consistent with the bus voltage.
  GridCase pf_case = grid;
  bool any_fixed = false;
  for (const LelPlacement& p : grid.lels)
    if (!p.size_to_bus) {
      any_fixed = true;
      Bus& b = pf_case.buses[pf_case.bus_index(p.bus)];
      b.p_load = p.params.nominal_mw() * p.params.prot.kappa_cap() / grid.s_base;
      b.q_load = 0.0;
    }
  pf = power_flow(pf_case, 50, 1e-10);
  for (int it = 0; any_fixed && it < 50; ++it) {
    double change = 0.0;
    for (const LelPlacement& p : grid.lels) {
      if (p.size_to_bus) continue;
      const int b = pf_case.bus_index(p.bus);
      const cd v = pf.v(b);
      const LelDemand d = lel_demand(lel_init(p.params, std::abs(v), std::arg(v)), p.params, v);
      Bus& bus = pf_case.buses[b];
      change = std::max({change, std::abs(d.p / grid.s_base - bus.p_load), std::abs(d.q / grid.s_base - bus.q_load)});
      bus.p_load = d.p / grid.s_base;
      bus.q_load = d.q / grid.s_base;
    }
    pf = power_flow(pf_case, 50, 1e-10);
    if (change < 1e-12) break;
  }

  for (const Generator& gen : grid.generators) gen_bus.push_back(grid.bus_index(gen.bus));
  const std::vector<int> nearest = nearest_generator(grid);

  y_static = CVector::Zero(n_bus);
  std::vector<bool> has_lel(n_bus, false);
  for (const LelPlacement& p : grid.lels) {
    LelSlot s;
    s.bus = grid.bus_index(p.bus);
    has_lel[s.bus] = true;
    s.source = nearest[s.bus];
    const cd v = pf.v(s.bus);
    const Bus& pb = pf_case.buses[s.bus];
    s.params = p.params;
    if (p.size_to_bus) {
      if (!(pb.p_load > 0.0))
        throw ValidationError("grid: LEL at bus " + std::to_string(p.bus) + " has no case load to size from");
      const double cap = p.params.prot.kappa_cap();
      const double mw = std::min(p.params.nominal_mw(), pb.p_load * grid.s_base / cap);
      s.params = allocate_demand(p.params, mw);
      s.params.prot.v_ref = std::abs(v);
      s.params.aux.v0 = std::abs(v);
    }
    s.init = lel_init(s.params, std::abs(v), std::arg(v));
    // A shunt carries whatever the facility does not draw of the solved bus load.
    const LelDemand d = lel_demand(s.init, s.params, v);
    const cd rest = cd(pb.p_load, pb.q_load) - cd(d.p, d.q) / grid.s_base;
    y_static(s.bus) += std::conj(rest) / std::norm(v);
    lels.push_back(s);
  }
  for (int b = 0; b < n_bus; ++b)
    if (!has_lel[b]) {
      const Bus& bus = pf_case.buses[b];
      y_static(b) += cd(bus.p_load, -bus.q_load) / std::norm(pf.v(b));
    }

  for (int gi = 0; gi < n_gen; ++gi) {
    const Generator& gen = grid.generators[gi];
    const cd v = pf.v(gen_bus[gi]);
    const cd s = pf.s_gen(gen_bus[gi]);
    const cd i = std::conj(s / v);
    const cd e = v + kJ * gen.xd_p * i;
    e_mag.push_back(std::abs(e));
    delta0.push_back(std::arg(e));
    p_mech.push_back(std::real(e * std::conj(i)));
  }
}

GridSimulator::GridSimulator(GridCase grid, SimConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(grid), cfg)) {}
GridSimulator::~GridSimulator() = default;
GridSimulator::GridSimulator(GridSimulator&&) noexcept = default;
GridSimulator& GridSimulator::operator=(GridSimulator&&) noexcept = default;

const PowerFlowResult& GridSimulator::power_flow_solution() const { return impl_->pf; }

std::vector<LelParams> GridSimulator::lel_params() const {
  std::vector<LelParams> out;
  for (const LelSlot& s : impl_->lels) out.push_back(s.params);
  return out;
}

std::vector<int> GridSimulator::lel_frequency_source() const {
  std::vector<int> out;
  for (const LelSlot& s : impl_->lels) out.push_back(s.source);
  return out;
}

namespace {

// One trajectory: continuous state vector, discrete LEL states, network matrix and
// the factorizations reused across steps.
class Run {
 public:
  Run(const GridSimulator::Impl& m, const EventSchedule& events) : m_(m), events_(events) {
    for (std::size_t k = 1; k < events_.size(); ++k)
      if (events_[k].t < events_[k - 1].t) throw ValidationError("events: schedule must be sorted by time");
    for (const GridEvent& e : events_) {
      if (!(e.t >= 0.0 && e.t <= m.cfg.horizon)) throw ValidationError("events: time outside [0, horizon]");
      if (e.kind == GridEvent::Kind::BranchTrip) {
        branch_of(e);
      } else {
        m.grid.bus_index(e.bus);
      }
    }
    in_service_.assign(m.grid.branches.size(), true);
    fault_.assign(static_cast<std::size_t>(m.n_bus), cd{});
    y_ = m.network(in_service_, fault_);

    x_ = Eigen::VectorXd::Zero(m.n_state());
    for (int g = 0; g < m.n_gen; ++g) {
      x_(m.i_delta(g)) = m.delta0[g];
      x_(m.i_omega(g)) = 1.0;
    }
    for (int l = 0; l < m.n_lel; ++l) {
      const LelState& s = m.lels[l].init;
      disc_.push_back(s);
      x_(m.i_motor(l)) = s.motor.ed_p;
      x_(m.i_motor(l) + 1) = s.motor.eq_p;
      x_(m.i_motor(l) + 2) = s.motor.slip;
      rng_.emplace_back(Rng::derive(m.cfg.seed, static_cast<std::uint64_t>(l)));
    }
    for (int b = 0; b < m.n_bus; ++b) {
      x_(m.i_vre(b)) = m.pf.v(b).real();
      x_(m.i_vim(b)) = m.pf.v(b).imag();
    }
    f_n_ = Eigen::VectorXd(m.n_diff());
    m.derivatives(x_, disc_, f_n_);

    steps_ = static_cast<long>(std::floor(m.cfg.horizon / m.cfg.dt + 1e-9));
    const std::size_t n = static_cast<std::size_t>(steps_) + 1;
    res_.time.reserve(n);
    for (int b = 0; b < m.n_bus; ++b) res_.bus_ids.push_back(m.grid.buses[b].id);
    res_.v_mag.assign(m.n_bus, {});
    res_.v_ang.assign(m.n_bus, {});
    for (const Generator& g : m.grid.generators) res_.gen_bus.push_back(g.bus);
    res_.omega.assign(m.n_gen, {});
    res_.delta.assign(m.n_gen, {});
    for (int l = 0; l < m.n_lel; ++l) {
      LelSeries s;
      s.bus = m.grid.buses[m.lels[l].bus].id;
      s.archetype = m.lels[l].params.archetype;
      s.prot = m.lels[l].params.prot;
      res_.lels.push_back(std::move(s));
    }
    record_network(0.0);
    record_lels();
  }

  SimResult run() {
    const SimConfig& cfg = m_.cfg;
    double spread_timer = 0.0;
    std::size_t next_event = 0;
    for (long n = 0; n < steps_; ++n) {
      const double t = static_cast<double>(n) * cfg.dt;
      bool switched = false;
      while (next_event < events_.size() && events_[next_event].t <= t + 0.5 * cfg.dt) {
        apply_event(events_[next_event++], t);
        switched = true;
      }
      if (switched) {
        y_ = m_.network(in_service_, fault_);
        lu_full_valid_ = lu_alg_valid_ = false;
        settle(n, t, true);
      }

      for (int l = 0; l < m_.n_lel; ++l)
        disc_[l].work = ou_step(disc_[l].work, m_.lels[l].params.work, cfg.dt, rng_[l]);

      step(n, t);
      const double t1 = static_cast<double>(n + 1) * cfg.dt;
      record_network(t1);
      if (discrete_update(t1)) settle(n + 1, t1, false);
      record_lels();

      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int g = 0; g < m_.n_gen; ++g) {
        lo = std::min(lo, x_(m_.i_delta(g)));
        hi = std::max(hi, x_(m_.i_delta(g)));
      }
      spread_timer = hi - lo > cfg.angle_limit ? spread_timer + cfg.dt : 0.0;
      if (spread_timer >= cfg.angle_hold - 1e-9)
        collapse(t1, n + 1, 0.0, "generator angle spread above " + std::to_string(cfg.angle_limit) +
                                      " rad for " + std::to_string(cfg.angle_hold) + " s");
    }
    return std::move(res_);
  }

 private:
  const GridSimulator::Impl& m_;
  const EventSchedule& events_;
  std::vector<bool> in_service_;
  std::vector<cd> fault_;
  CMatrix y_;
  Eigen::VectorXd x_, f_n_;
  std::vector<LelState> disc_;
  std::vector<Rng> rng_;
  long steps_ = 0;
  SimResult res_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_full_, lu_alg_;
  bool lu_full_valid_ = false, lu_alg_valid_ = false;

  std::size_t branch_of(const GridEvent& e) const {
    for (std::size_t k = 0; k < m_.grid.branches.size(); ++k) {
      const Branch& br = m_.grid.branches[k];
      if ((br.from == e.from && br.to == e.to) || (br.from == e.to && br.to == e.from)) return k;
    }
    throw ValidationError("events: no branch " + std::to_string(e.from) + "-" + std::to_string(e.to));
  }

  void log(double t, EventType type, int lel, int bus, std::string detail = {}) {
    res_.events.push_back({t, type, lel, bus, std::move(detail)});
  }

  void apply_event(const GridEvent& e, double t) {
    switch (e.kind) {
      case GridEvent::Kind::Fault:
        fault_[m_.grid.bus_index(e.bus)] = e.y_fault;
        log(t, EventType::FaultApplied, -1, e.bus);
        break;
      case GridEvent::Kind::Clear:
        fault_[m_.grid.bus_index(e.bus)] = cd{};
        log(t, EventType::FaultCleared, -1, e.bus);
        break;
      case GridEvent::Kind::BranchTrip:
        in_service_[branch_of(e)] = false;
        log(t, EventType::BranchTrip, -1, e.from, std::to_string(e.from) + "-" + std::to_string(e.to));
        break;
    }
  }

  [[noreturn]] void collapse(double t, long step, double residual, const std::string& why) {
    log(t, EventType::Collapse, -1, -1, why);
    res_.collapsed = true;
    res_.collapse_reason = why;
    res_.collapse_time = t;
    // A failed post-switching solve leaves the network row of the last sample without its LEL row.
    std::size_t n = res_.time.size();
    for (const LelSeries& l : res_.lels) n = std::min(n, l.p.size());
    res_.time.resize(n);
    for (auto* series : {&res_.v_mag, &res_.v_ang, &res_.omega, &res_.delta})
      for (auto& s : *series) s.resize(n);
    throw CollapseError("collapse at t = " + std::to_string(t) + " s (step " + std::to_string(step) + "): " + why,
                        std::move(res_), step, residual);
  }

  // Trapezoidal residual of the full state about (x_n, f_n), plus the network rows.
  void residual(const Eigen::VectorXd& x, const Eigen::VectorXd& x_n, Eigen::VectorXd& r) const {
    const int nd = m_.n_diff();
    Eigen::VectorXd f(nd);
    m_.derivatives(x, disc_, f);
    const double h = 0.5 * m_.cfg.dt;
    r.head(nd) = x.head(nd) - x_n.head(nd) - h * (f + f_n_);
    m_.algebraic(x, disc_, y_, r.data() + nd);
  }

  void factor_full(const Eigen::VectorXd& x, const Eigen::VectorXd& x_n, const Eigen::VectorXd& r0) {
    const int ns = m_.n_state();
    Eigen::MatrixXd jac(ns, ns);
    Eigen::VectorXd xp = x, rp(ns);
    for (int j = 0; j < ns; ++j) {
      const double hj = 1e-7 * std::max(1.0, std::abs(x(j)));
      xp(j) = x(j) + hj;
      residual(xp, x_n, rp);
      jac.col(j) = (rp - r0) / hj;
      xp(j) = x(j);
    }
    lu_full_.compute(jac);
    lu_full_valid_ = true;
  }

  // Newton with a reused factorization; the Jacobian is refreshed when progress stalls.
  bool newton_full(Eigen::VectorXd& x, const Eigen::VectorXd& x_n, double& norm) {
    const SimConfig& cfg = m_.cfg;
    Eigen::VectorXd r(m_.n_state());
    double prev = std::numeric_limits<double>::infinity();
    bool fresh = false;
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
      residual(x, x_n, r);
      norm = r.cwiseAbs().maxCoeff();
      if (!std::isfinite(norm)) return false;
      if (norm < cfg.newton_tol) return true;
      if (!lu_full_valid_ || (!fresh && norm > 0.25 * prev)) {
        factor_full(x, x_n, r);
        fresh = true;
      } else {
        fresh = false;
      }
      prev = norm;
      const Eigen::VectorXd dx = lu_full_.solve(r);
      if (!fresh) {
        x -= dx;
        continue;
      }
      // Backtrack on the residual 2-norm; constant-power loads near their voltage
      // limit otherwise make full steps cycle.
      const double r2 = r.norm();
      Eigen::VectorXd trial(x.size()), rt(r.size());
      double alpha = 1.0;
      for (int k = 0; k < 12; ++k, alpha *= 0.5) {
        trial = x - alpha * dx;
        residual(trial, x_n, rt);
        if (std::isfinite(rt.norm()) && rt.norm() < (1.0 - 1e-4 * alpha) * r2) break;
      }
      x = trial;
      if (alpha < 1.0) lu_full_valid_ = false;  // damped: stay on full Newton
    }
    residual(x, x_n, r);
    norm = r.cwiseAbs().maxCoeff();
    return norm < cfg.newton_tol;
  }

  void step(long n, double t) {
    const int nd = m_.n_diff();
    const Eigen::VectorXd x_n = x_;
    Eigen::VectorXd x = x_n;
    x.head(nd) += m_.cfg.dt * f_n_;  // explicit Euler predictor
    double norm = 0.0;
    if (!newton_full(x, x_n, norm)) {
      // Retry from the previous state with a fresh Jacobian before declaring failure;
      // the predictor overshoots badly when a switch has just excited a fast mode.
      lu_full_valid_ = false;
      x = x_n;
      if (!newton_full(x, x_n, norm))
        collapse(t + m_.cfg.dt, n + 1, norm,
                 "Newton did not converge at step " + std::to_string(n + 1) + ", residual " + std::to_string(norm));
    }
    x_ = x;
    m_.derivatives(x_, disc_, f_n_);
  }

  // Re-solve the network with every differential state held.
  // Newton on the network rows with every differential state held; returns the final residual.
  double solve_network(Eigen::VectorXd& x) {
    const int nd = m_.n_diff(), na = 2 * m_.n_bus;
    Eigen::VectorXd r(na), rp(na);
    auto eval = [&](const Eigen::VectorXd& xx, Eigen::VectorXd& out) { m_.algebraic(xx, disc_, y_, out.data()); };
    double prev = std::numeric_limits<double>::infinity(), norm = 0.0;
    bool fresh = false;
    for (int it = 0; it < 2 * m_.cfg.newton_max_iter; ++it) {
      eval(x, r);
      norm = r.cwiseAbs().maxCoeff();
      if (!std::isfinite(norm) || norm < m_.cfg.newton_tol) break;
      if (!lu_alg_valid_ || (!fresh && norm > 0.25 * prev)) {
        Eigen::MatrixXd jac(na, na);
        Eigen::VectorXd xp = x;
        for (int j = 0; j < na; ++j) {
          const double hj = 1e-7 * std::max(1.0, std::abs(x(nd + j)));
          xp(nd + j) += hj;
          eval(xp, rp);
          jac.col(j) = (rp - r) / hj;
          xp(nd + j) = x(nd + j);
        }
        lu_alg_.compute(jac);
        lu_alg_valid_ = fresh = true;
      } else {
        fresh = false;
      }
      prev = norm;
      const Eigen::VectorXd dv = lu_alg_.solve(r);
      if (!fresh) {
        x.tail(na) -= dv;
        continue;
      }
      const double r2 = r.norm();
      const Eigen::VectorXd start = x.tail(na);
      double alpha = 1.0;
      for (int k = 0; k < 12; ++k, alpha *= 0.5) {
        x.tail(na) = start - alpha * dv;
        eval(x, rp);
        if (std::isfinite(rp.norm()) && rp.norm() < (1.0 - 1e-4 * alpha) * r2) break;
      }
      if (alpha < 1.0) lu_alg_valid_ = false;
    }
    return std::isfinite(norm) ? norm : std::numeric_limits<double>::infinity();
  }

  // Network voltages with each LEL replaced by the admittance that draws its present
  // current at the initial operating point: a start on the normal operating branch.
  Eigen::VectorXd impedance_start() const {
    Eigen::VectorXd x0 = x_;
    for (int b = 0; b < m_.n_bus; ++b) {
      x0(m_.i_vre(b)) = m_.pf.v(b).real();
      x0(m_.i_vim(b)) = m_.pf.v(b).imag();
    }
    CMatrix y = y_;
    for (int l = 0; l < m_.n_lel; ++l) {
      const int b = m_.lels[l].bus;
      y(b, b) += m_.lel_current(x0, disc_, l) / m_.pf.v(b);
    }
    CVector src = CVector::Zero(m_.n_bus);
    for (int g = 0; g < m_.n_gen; ++g)
      src(m_.gen_bus[g]) += std::polar(m_.e_mag[g], x_(m_.i_delta(g))) / (kJ * m_.grid.generators[g].xd_p);
    const CVector v = y.partialPivLu().solve(src);
    Eigen::VectorXd x = x_;
    for (int b = 0; b < m_.n_bus; ++b) {
      x(m_.i_vre(b)) = v(b).real();
      x(m_.i_vim(b)) = v(b).imag();
    }
    return x;
  }

  // Re-solve the network after switching. Constant-power demand admits a second,
  // low-voltage solution; after a network change the solve starts from the
  // impedance estimate so it stays on the normal branch whenever that exists.
  void settle(long n, double t, bool network_changed) {
    if (network_changed) {
      Eigen::VectorXd x = impedance_start();
      lu_alg_valid_ = false;
      if (solve_network(x) < m_.cfg.newton_tol) {
        x_ = x;
        m_.derivatives(x_, disc_, f_n_);
        return;
      }
      lu_alg_valid_ = false;
    }
    const double norm = solve_network(x_);
    if (!(norm < m_.cfg.newton_tol))
      collapse(t, n, norm, "network solution failed after a switching event, residual " + std::to_string(norm));
    m_.derivatives(x_, disc_, f_n_);
  }

  // Stall and protection logic on the converged step; true if anything switched.
  bool discrete_update(double t) {
    const double dt = m_.cfg.dt;
    bool changed = false;
    for (int l = 0; l < m_.n_lel; ++l) {
      const LelSlot& slot = m_.lels[l];
      const cd v = m_.voltage(x_, slot.bus);
      const int bus_id = m_.grid.buses[slot.bus].id;
      LelState& s = disc_[l];

      MotorState motor = m_.motor_at(x_, disc_, l);
      const MotorMode was = motor.mode;
      motor = stall_update(motor, std::abs(v), dt, slot.params.cool, std::arg(v));
      if (motor.mode != was) {
        changed = true;
        log(t, motor.mode == MotorMode::StallTripped ? EventType::StallTrip : EventType::CoolingReconnect, l, bus_id);
      }
      if (motor.slip < 0.0 || motor.slip > 1.0) {
        motor.slip = std::clamp(motor.slip, 0.0, 1.0);
        changed = true;
      }
      s.motor = motor;
      x_(m_.i_motor(l)) = motor.ed_p;
      x_(m_.i_motor(l) + 1) = motor.eq_p;
      x_(m_.i_motor(l) + 2) = motor.slip;

      const ProtectionState before = s.prot;
      s.prot = protection_step(before, std::abs(v), x_(m_.i_omega(slot.source)), dt, slot.params.prot);
      if (s.prot.kappa != before.kappa) changed = true;
      const bool was_shed = before.mode == ProtectionMode::Shed || before.mode == ProtectionMode::RecoveryWait;
      if (s.prot.mode == ProtectionMode::Shed && !was_shed) log(t, EventType::Shed, l, bus_id);
      if (was_shed && (s.prot.mode == ProtectionMode::Ramping || s.prot.mode == ProtectionMode::Connected))
        log(t, EventType::RampStart, l, bus_id);
      if (s.prot.mode == ProtectionMode::Connected && before.kappa < s.prot.kappa)
        log(t, EventType::Reconnected, l, bus_id);
    }
    if (changed) lu_full_valid_ = lu_alg_valid_ = false;
    return changed;
  }

  void record_network(double t) {
    res_.time.push_back(t);
    for (int b = 0; b < m_.n_bus; ++b) {
      const cd v = m_.voltage(x_, b);
      res_.v_mag[b].push_back(std::abs(v));
      res_.v_ang[b].push_back(std::arg(v));
    }
    for (int g = 0; g < m_.n_gen; ++g) {
      res_.omega[g].push_back(x_(m_.i_omega(g)));
      res_.delta[g].push_back(x_(m_.i_delta(g)));
    }
  }

  void record_lels() {
    for (int l = 0; l < m_.n_lel; ++l) {
      const LelSlot& slot = m_.lels[l];
      LelState s = disc_[l];
      s.motor = m_.motor_at(x_, disc_, l);
      const LelDemand d = lel_demand(s, slot.params, m_.voltage(x_, slot.bus));
      LelSeries& out = res_.lels[l];
      out.p.push_back(d.p);
      out.q.push_back(d.q);
      out.kappa.push_back(s.prot.kappa);
      out.prot_mode.push_back(static_cast<int>(s.prot.mode));
      out.motor_mode.push_back(static_cast<int>(s.motor.mode));
    }
  }
};

}  // namespace

double GridSimulator::initial_derivative_norm() const {
  const Impl& m = *impl_;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.n_state());
  std::vector<LelState> disc;
  for (int g = 0; g < m.n_gen; ++g) {
    x(m.i_delta(g)) = m.delta0[g];
    x(m.i_omega(g)) = 1.0;
  }
  for (int l = 0; l < m.n_lel; ++l) {
    disc.push_back(m.lels[l].init);
    x(m.i_motor(l)) = m.lels[l].init.motor.ed_p;
    x(m.i_motor(l) + 1) = m.lels[l].init.motor.eq_p;
    x(m.i_motor(l) + 2) = m.lels[l].init.motor.slip;
  }
  for (int b = 0; b < m.n_bus; ++b) {
    x(m.i_vre(b)) = m.pf.v(b).real();
    x(m.i_vim(b)) = m.pf.v(b).imag();
  }
  Eigen::VectorXd f(m.n_diff());
  m.derivatives(x, disc, f);
  return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
}

SimResult GridSimulator::run(const EventSchedule& events) const {
  Run r(*impl_, events);
  return r.run();
}

SimResult run_simulation(const GridCase& grid, const EventSchedule& events, const SimConfig& cfg) {
  return GridSimulator(grid, cfg).run(events);
}

SimResult run_scenario(const GridCase& grid, const EventSchedule& events, const SimConfig& cfg) {
  try {
    return run_simulation(grid, events, cfg);
  } catch (const CollapseError& e) {
    return e.partial();
  }
}

}  // namespace lel
