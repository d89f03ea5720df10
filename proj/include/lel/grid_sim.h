#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lel/errors.h"
#include "lel/lel_model.h"
#include "lel/sim_result.h"

namespace lel {

enum class BusType { Slack, PV, PQ };

struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double v_set = 1.0;
  double p_load = 0.0;  // pu on s_base
  double q_load = 0.0;
  double g_sh = 0.0;
  double b_sh = 0.0;
};

// Tap ratio sits on the from side: y/t^2 at from, y at to, -y/t off-diagonal.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;  // total line charging
  double tap = 1.0;
};

struct Generator {
  int bus = 0;
  double h = 0.0;     // s, on s_base
  double d = 0.0;     // pu power per pu speed deviation
  double xd_p = 0.0;  // pu
  double p_set = 0.0;
  double v_set = 1.0;
};

struct LelPlacement {
  int bus = 0;
  LelParams params;
  // Archetype placements keep their facility size, capped at the bus's case load;
  // the rest of that load stays a constant admittance. Otherwise the parameters are
  // used as given and the facility's demand replaces the bus load.
  bool size_to_bus = true;
};

struct GridCase {
  double s_base = 100.0;
  double f_base = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<LelPlacement> lels;

  int bus_index(int id) const;  // throws ValidationError if absent
  void validate() const;
};

// Sectioned CSV: [CASE], [BUS], [BRANCH], [GEN], optional [LEL]; each section
// starts with its column header row. Parameter files in [LEL] resolve against base_dir.
GridCase load_case(const std::string& document, const std::string& base_dir = ".");
GridCase load_case_file(const std::string& path);

// Buses that may host an LEL: PQ buses with positive case load.
std::vector<int> eligible_lel_buses(const GridCase& grid);

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Network admittance matrix (branches and bus shunts only), in bus order.
// in_service, if given, masks branches.
CMatrix build_ybus(const GridCase& grid, const std::vector<bool>* in_service = nullptr);

struct PowerFlowResult {
  CVector v;
  int iterations = 0;
  double mismatch = 0.0;
  CVector s_gen;  // generation at each bus, pu
};

// Newton-Raphson from a flat start. Every bus load (LEL buses included) is
// constant power. Throws ConvergenceError with the final mismatch.
PowerFlowResult power_flow(const GridCase& grid, int max_iterations = 50, double tolerance = 1e-8);

struct GridEvent {
  enum class Kind { Fault, Clear, BranchTrip };
  double t = 0.0;
  Kind kind = Kind::Fault;
  int bus = -1;                              // fault and clear
  int from = -1, to = -1;                    // branch trip
  std::complex<double> y_fault{0.0, -1e4};  // fault shunt, pu
};
using EventSchedule = std::vector<GridEvent>;

// Fault at fault_bus from t_fault, cleared clear_after seconds later.
EventSchedule fault_schedule(int fault_bus, double t_fault, double clear_after);

struct SimConfig {
  double dt = 1e-3;
  double horizon = 40.0;
  std::uint64_t seed = 1;
  double newton_tol = 1e-8;
  int newton_max_iter = 20;
  double angle_limit = 3.141592653589793;  // rad, generator angle spread
  double angle_hold = 1.0;                  // s the spread must persist to declare collapse

  void validate() const;
};

// Simulated collapse: Newton failure or sustained loss of synchronism. Carries
// the result up to the last completed step.
class CollapseError : public NumericalError {
 public:
  CollapseError(const std::string& what, SimResult partial, long step, double residual)
      : NumericalError(what), partial_(std::move(partial)), step_(step), residual_(residual) {}
  const SimResult& partial() const { return partial_; }
  long step() const { return step_; }
  double residual() const { return residual_; }

 private:
  SimResult partial_;
  long step_;
  double residual_;
};

class GridSimulator {
 public:
  // Solves the power flow, sizes the LELs and initializes every dynamic state.
  GridSimulator(GridCase grid, SimConfig cfg);
  ~GridSimulator();
  GridSimulator(GridSimulator&&) noexcept;
  GridSimulator& operator=(GridSimulator&&) noexcept;

  // Largest |time derivative| of any state at t = 0.
  double initial_derivative_norm() const;
  // Power-flow solution used for initialization.
  const PowerFlowResult& power_flow_solution() const;
  // LEL parameters after sizing, in placement order.
  std::vector<LelParams> lel_params() const;
  // Frequency source for each LEL: index of its electrically nearest generator.
  std::vector<int> lel_frequency_source() const;

  // Runs from the initial state. Throws CollapseError on collapse.
  SimResult run(const EventSchedule& events) const;

  struct Impl;  // defined in grid_sim.cpp

 private:
  std::unique_ptr<Impl> impl_;
};

SimResult run_simulation(const GridCase& grid, const EventSchedule& events, const SimConfig& cfg);

// Like run_simulation, but collapse is returned as result.collapsed instead of thrown.
SimResult run_scenario(const GridCase& grid, const EventSchedule& events, const SimConfig& cfg);

// ---- Placement, regimes and sweeps ----

// Case with K LELs on distinct eligible buses, archetypes drawn uniformly unless fixed.
GridCase place_lels(const GridCase& base, int k, std::uint64_t seed,
                    std::optional<Archetype> archetype = std::nullopt);

struct RegimeFlags {
  bool ride_through = false;         // no LEL tripped
  bool mass_disconnection = false;   // >= 3 trips within 0.5 s and post-clear omega > 1
  bool reconnection_retrip = false;  // a trip begins after another LEL's ramp start
  bool no_reconnection = false;      // an LEL never returns, or the system collapsed
};
RegimeFlags classify_regimes(const SimResult& result);

struct ScenarioConfig {
  SimConfig sim;
  double t_fault = 5.0;
  double clear_after = 0.1;
  int fault_bus = -1;  // -1: drawn from the seed
  std::optional<Archetype> archetype;  // empty: drawn per LEL
};

struct ScenarioDraw {
  GridCase grid;
  EventSchedule events;
  SimConfig sim;
};

// Placement, fault schedule and solver seed derived from one scenario seed.
ScenarioDraw draw_scenario(const GridCase& base, int k, std::uint64_t seed, const ScenarioConfig& cfg);

// K LELs and the fault bus drawn from seed; returns the simulated scenario.
SimResult random_scenario(const GridCase& base, int k, std::uint64_t seed, const ScenarioConfig& cfg);

struct SweepRow {
  int k = 0;
  double voltage_nadir = 0.0;         // median over trials
  double frequency_overshoot = 0.0;   // median over trials
  double reconnection_delay = 0.0;    // median over trials; infinity means "never"
  int collapses = 0;
};

std::vector<SweepRow> penetration_sweep(const GridCase& base, const std::vector<int>& k_values, int trials,
                                        const ScenarioConfig& cfg, std::uint64_t seed = 1);

}  // namespace lel
