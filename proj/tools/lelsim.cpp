// lelsim: load simulation, calibration, grid scenarios and the experiment drivers.
// Exit codes: 0 success, 1 invalid input, 2 numerical failure or simulated collapse.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "lel/calibration.h"
#include "lel/cli_io.h"
#include "lel/errors.h"
#include "lel/experiments.h"
#include "lel/grid_sim.h"
#include "lel/kvtext.h"
#include "lel/metrics.h"

using namespace lel;

namespace {

constexpr int kOk = 0, kInvalid = 1, kNumerical = 2;

// Case argument: a path, or the name of a bundled case ("ieee39", "toy9", "toy2").
GridCase resolve_case(const std::string& name) {
  if (std::filesystem::exists(name)) return load_case_file(name);
  const std::string bundled = std::string(LEL_DATA_DIR) + "/" + name + ".case";
  if (std::filesystem::exists(bundled)) return load_case_file(bundled);
  throw ValidationError("no case file or bundled case named '" + name + "'");
}

LelParams base_params(const std::string& params_file, const std::string& archetype) {
  if (!params_file.empty()) return parse_lel_params(read_text_file(params_file));
  return archetype_defaults(archetype_from_string(archetype));
}

// Writes to path, or to stdout when path is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text;
  else
    write_text_file(path, text);
}

std::string num(double v) { return std::isinf(v) ? "inf" : format_double(v); }

// ---- simulate-load ----

struct LoadArgs {
  std::string archetype = "DATACENTER", params, voltage_trace, out;
  double horizon = 3600.0, dt = 1.0, voltage = 1.0, omega = 1.0;
  std::uint64_t seed = 1;
};

int simulate_load(const LoadArgs& a) {
  const LelParams p = base_params(a.params, a.archetype);
  p.validate();
  std::vector<double> v;
  double dt = a.dt;
  if (!a.voltage_trace.empty()) {
    const Trace vt = read_trace(a.voltage_trace, {"v"});
    v = vt.channel("v");
    dt = vt.sample_period;
  } else {
    if (!(dt > 0.0 && a.horizon > dt)) throw ValidationError("simulate-load: need horizon > dt > 0");
    v.assign(static_cast<std::size_t>(std::floor(a.horizon / dt + 1e-9)), a.voltage);
  }
  LelState s = lel_init(p, v.front());
  Rng rng(a.seed);
  Trace t;
  t.sample_period = dt;
  t.t0 = dt;
  t.origin = "lelsim simulate-load";
  for (const char* name : {"p", "q", "p_work", "p_cool", "q_cool", "p_aux", "q_aux", "kappa"})
    t.channels.push_back({name, {}});
  for (double vk : v) {
    const LelStepResult r = lel_step(s, vk, 0.0, a.omega, dt, rng, p);
    s = r.state;
    const LelDemand& d = r.demand;
    for (auto [i, x] : {std::pair{0, d.p}, {1, d.q}, {2, d.p_work}, {3, d.p_cool}, {4, d.q_cool}, {5, d.p_aux},
                        {6, d.q_aux}, {7, s.prot.kappa}})
      t.channels[static_cast<std::size_t>(i)].values.push_back(x);
  }
  emit(a.out, format_trace(t));
  return kOk;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string data, set = "work", mode = "pattern", archetype = "DATACENTER", params, out, trace_out;
  double bounds_frac = 0.5;
  bool random_init = false;
  int max_evals = 300, restarts = 1, repeats = 1, window_length = 5, dim = 64, hidden = 128, epochs = 200;
  std::uint64_t seed = 1;
};

int calibrate_cmd(const CalibrateArgs& a) {
  CalibrationConfig cfg;
  cfg.set = param_set_from_string(a.set);
  if (a.mode == "pattern")
    cfg.mode = ObjectiveMode::Pattern;
  else if (a.mode == "mse")
    cfg.mode = ObjectiveMode::Mse;
  else
    throw ValidationError("--mode must be pattern or mse");
  cfg.base = base_params(a.params, a.archetype);
  const std::vector<double> reference = extract_theta(cfg.base, cfg.set);
  cfg.bounds = relative_bounds(cfg.set, reference, a.bounds_frac);
  cfg.max_evals = a.max_evals;
  cfg.restarts = a.restarts;
  cfg.repeats = a.repeats;
  cfg.window_length = a.window_length;
  cfg.stride = default_stride(a.window_length);
  cfg.tcl.dim = a.dim;
  cfg.tcl.hidden = a.hidden;
  cfg.tcl.epochs = a.epochs;
  cfg.sim_seed = Rng::derive(a.seed, 1);
  cfg.encoder_seed = Rng::derive(a.seed, 2);
  cfg.optimizer_seed = Rng::derive(a.seed, 3);
  const Trace data = read_trace(a.data);

  std::vector<double> init = reference;
  if (a.random_init) {
    Rng rng(Rng::derive(a.seed, 4));
    for (std::size_t i = 0; i < init.size(); ++i) init[i] = rng.uniform(cfg.bounds[i].lo, cfg.bounds[i].hi);
    if (cfg.set == ParamSet::Aux) {
      const double s = init[2] + init[3] + init[4];
      for (int i = 2; i < 5; ++i) init[static_cast<std::size_t>(i)] /= s;
    }
  }
  const CalibrationResult r = calibrate(init, data, cfg);
  write_text_file(a.out, calibrated_params_text(r, cfg));
  if (!a.trace_out.empty()) write_text_file(a.trace_out, objective_trace_csv(r));
  std::cout << "objective " << num(r.initial_objective) << " -> " << num(r.final_objective) << "\n"
            << "pattern_distance " << num(r.initial_pattern_distance) << " -> " << num(r.final_pattern_distance)
            << "\nevaluations " << r.evaluations << (r.budget_exhausted ? " (budget exhausted)" : "") << "\n";
  return kOk;
}

// ---- grid-sim ----

struct GridArgs {
  std::string case_name, events, archetype, out = "grid-sim";
  int k = 0, fault_bus = -1;
  double t_fault = 5.0, clear_after = 0.1, dt = 1e-3, horizon = 40.0;
  bool no_events = false;
  std::uint64_t seed = 1;
};

int grid_sim(const GridArgs& a) {
  const GridCase base = resolve_case(a.case_name);
  ScenarioConfig sc;
  sc.sim.dt = a.dt;
  sc.sim.horizon = a.horizon;
  sc.fault_bus = a.fault_bus;
  sc.t_fault = a.t_fault;
  sc.clear_after = a.clear_after;
  if (!a.archetype.empty()) sc.archetype = archetype_from_string(a.archetype);
  if (a.no_events && !a.events.empty()) throw ValidationError("--no-events and --events are exclusive");
  ScenarioDraw d = draw_scenario(base, a.k, a.seed, sc);
  if (a.no_events) d.events.clear();
  if (!a.events.empty()) d.events = parse_event_schedule(read_text_file(a.events));

  const SimResult r = run_scenario(d.grid, d.events, d.sim);
  write_text_file(a.out + "_series.csv", sim_result_csv(r));
  write_text_file(a.out + "_events.csv", event_log_csv(r.events));

  const RegimeFlags f = classify_regimes(r);
  std::cout << "samples " << r.samples() << "\nlels " << r.lels.size() << "\nevents " << r.events.size()
            << "\nvoltage_nadir " << num(voltage_nadir(r)) << "\nfrequency_overshoot "
            << num(frequency_overshoot(r)) << "\nregimes ride_through=" << f.ride_through
            << " mass_disconnection=" << f.mass_disconnection << " reconnection_retrip=" << f.reconnection_retrip
            << " no_reconnection=" << f.no_reconnection << "\n";
  if (r.collapsed) {
    std::cerr << "collapse at t = " << num(r.collapse_time) << " s: " << r.collapse_reason << "\n";
    return kNumerical;
  }
  return kOk;
}

// ---- metrics ----

struct MetricsArgs {
  std::string a, b, channel, out;
  double max_lag_frac = 0.25;
};

const std::vector<double>& pick(const Trace& t, const std::string& channel) {
  if (!channel.empty()) return t.channel(channel);
  if (t.channels.empty()) throw ValidationError("trace has no channels");
  return t.has_channel("p") ? t.channel("p") : t.channels.front().values;
}

int metrics_cmd(const MetricsArgs& a) {
  const Trace model = read_trace(a.a), data = read_trace(a.b);
  const MetricReport r = compare_series(pick(model, a.channel), pick(data, a.channel), a.max_lag_frac);
  std::cout << "dtw=" << num(r.dtw) << " max_xcorr=" << num(r.max_xcorr) << " cosine=" << num(r.cosine) << "\n";
  if (!a.out.empty()) write_text_file(a.out, metric_report_csv(r));
  return kOk;
}

// ---- sweep-k ----

struct SweepArgs {
  std::string case_name = "ieee39", out;
  std::vector<int> k{2, 5, 10};
  int trials = 10, fault_bus = -1;
  double t_fault = 5.0, clear_after = 0.1, dt = 5e-3, horizon = 20.0;
  std::uint64_t seed = 1;
};

int sweep_k(const SweepArgs& a) {
  ScenarioConfig sc;
  sc.sim.dt = a.dt;
  sc.sim.horizon = a.horizon;
  sc.fault_bus = a.fault_bus;
  sc.t_fault = a.t_fault;
  sc.clear_after = a.clear_after;
  emit(a.out, sweep_csv(penetration_sweep(resolve_case(a.case_name), a.k, a.trials, sc, a.seed)));
  return kOk;
}

// ---- calibration experiments ----

struct ExperimentArgs {
  double horizon = 7200.0, dt = 1.0;
  int max_evals = 300, epochs = 10, hidden = 16, dim = 8, window_length = 5;
  bool bursty = false;
  std::uint64_t seed = 1;
};

ExperimentConfig experiment(const ExperimentArgs& a) {
  ExperimentConfig e = a.bursty ? bursty_experiment() : default_experiment();
  e.horizon = a.horizon;
  e.dt = a.dt;
  e.data_seed = Rng::derive(a.seed, 1);
  e.holdout_seed = Rng::derive(a.seed, 2);
  e.calib.max_evals = a.max_evals;
  e.calib.tcl.epochs = a.epochs;
  e.calib.tcl.hidden = a.hidden;
  e.calib.tcl.dim = a.dim;
  e.calib.window_length = a.window_length;
  e.calib.stride = default_stride(a.window_length);
  return e;
}

void add_experiment_options(CLI::App* app, ExperimentArgs& a) {
  app->add_option("--horizon", a.horizon, "synthetic trace length, s")->capture_default_str();
  app->add_option("--dt", a.dt, "sample period, s")->capture_default_str();
  app->add_option("--max-evals", a.max_evals, "objective evaluations per calibration")->capture_default_str();
  app->add_option("--epochs", a.epochs, "encoder training epochs")->capture_default_str();
  app->add_option("--hidden", a.hidden, "encoder hidden width")->capture_default_str();
  app->add_option("--seed", a.seed, "experiment seed")->capture_default_str();
  app->add_flag("--bursty", a.bursty, "quiet baseline with rare saturating bursts as the ground truth");
}

int sweep_tcl(const ExperimentArgs& a, const std::vector<int>& lengths, const std::vector<int>& dims,
              const std::string& out) {
  const auto rows = tcl_grid(experiment(a), lengths, dims, Rng::derive(a.seed, 3));
  std::string csv = "L,d,initial_pattern_distance,final_pattern_distance,dtw_init,dtw_final\n";
  for (const auto& r : rows)
    csv += std::to_string(r.window_length) + "," + std::to_string(r.dim) + "," + num(r.initial_pattern_distance) +
           "," + num(r.final_pattern_distance) + "," + num(r.dtw_init) + "," + num(r.dtw_final) + "\n";
  emit(out, csv);
  return kOk;
}

int robustness(const ExperimentArgs& a, int inits, const std::string& out, const std::string& patterns_out) {
  const auto runs = multi_init_calibration(experiment(a), inits, Rng::derive(a.seed, 3));
  std::string csv = "init,initial_pattern_distance,final_pattern_distance,dtw_init,dtw_final\n";
  std::vector<Eigen::VectorXd> before, after;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    csv += std::to_string(i) + "," + num(r.initial_pattern_distance) + "," + num(r.final_pattern_distance) + "," +
           num(r.dtw_init) + "," + num(r.dtw_final) + "\n";
    before.push_back(r.pattern_init);
    after.push_back(r.pattern_final);
  }
  emit(out, csv);
  if (!patterns_out.empty()) {
    std::string p = "init,stage";
    for (long j = 0; j < before.front().size(); ++j) p += ",s" + std::to_string(j);
    p += "\n";
    for (std::size_t i = 0; i < runs.size(); ++i)
      for (const auto& [stage, vec] : {std::pair{"uncalibrated", &before[i]}, {"calibrated", &after[i]}}) {
        p += std::to_string(i) + "," + stage;
        for (long j = 0; j < vec->size(); ++j) p += "," + num((*vec)(j));
        p += "\n";
      }
    write_text_file(patterns_out, p);
  }
  if (runs.size() > 1) {
    const double s0 = pattern_spread(before), s1 = pattern_spread(after);
    std::cerr << "pattern spread " << num(s0) << " -> " << num(s1) << " (ratio " << num(s1 / s0) << ")\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large electronic load modelling and grid scenarios"};
  app.set_config("--config", "", "flat key = value file with option defaults ([subcommand] sections)");
  app.require_subcommand(1);

  LoadArgs load;
  auto* c_load = app.add_subcommand("simulate-load", "workload, cooling and auxiliary trace of one facility");
  c_load->add_option("--archetype", load.archetype, "DATACENTER, CRYPTO_MINING or ELECTROLYZER")->capture_default_str();
  c_load->add_option("--params", load.params, "parameter-exchange file (overrides --archetype)");
  c_load->add_option("--horizon", load.horizon, "s")->capture_default_str();
  c_load->add_option("--dt", load.dt, "s")->capture_default_str();
  c_load->add_option("--voltage", load.voltage, "constant terminal voltage, pu")->capture_default_str();
  c_load->add_option("--voltage-trace", load.voltage_trace, "trace with channel v (sets dt and horizon)");
  c_load->add_option("--omega", load.omega, "frequency, pu")->capture_default_str();
  c_load->add_option("--seed", load.seed)->capture_default_str();
  c_load->add_option("--out", load.out, "output trace (stdout if omitted)");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "fit one parameter block to a data trace");
  c_cal->add_option("--data", cal.data, "data trace")->required();
  c_cal->add_option("--set", cal.set, "work, cool or aux")->capture_default_str();
  c_cal->add_option("--mode", cal.mode, "pattern or mse")->capture_default_str();
  c_cal->add_option("--archetype", cal.archetype)->capture_default_str();
  c_cal->add_option("--params", cal.params, "base parameter-exchange file");
  c_cal->add_option("--bounds-frac", cal.bounds_frac, "search box half-width relative to the base")->capture_default_str();
  c_cal->add_flag("--random-init", cal.random_init, "start from a random point in the box instead of the base");
  c_cal->add_option("--max-evals", cal.max_evals)->capture_default_str();
  c_cal->add_option("--restarts", cal.restarts)->capture_default_str();
  c_cal->add_option("--repeats", cal.repeats, "model realizations averaged per evaluation")->capture_default_str();
  c_cal->add_option("--window-length", cal.window_length)->capture_default_str();
  c_cal->add_option("--dim", cal.dim, "embedding size")->capture_default_str();
  c_cal->add_option("--hidden", cal.hidden)->capture_default_str();
  c_cal->add_option("--epochs", cal.epochs)->capture_default_str();
  c_cal->add_option("--seed", cal.seed)->capture_default_str();
  c_cal->add_option("--out", cal.out, "calibrated parameter-exchange file")->required();
  c_cal->add_option("--trace-out", cal.trace_out, "objective trace CSV");

  GridArgs grid;
  auto* c_grid = app.add_subcommand("grid-sim", "run one scenario and write its series and event log");
  c_grid->add_option("case", grid.case_name, "case file or bundled case name")->required();
  c_grid->add_option("--k", grid.k, "number of LELs placed")->capture_default_str();
  c_grid->add_option("--archetype", grid.archetype, "fix every LEL's archetype");
  c_grid->add_option("--fault-bus", grid.fault_bus, "-1 draws it from the seed")->capture_default_str();
  c_grid->add_option("--t-fault", grid.t_fault)->capture_default_str();
  c_grid->add_option("--clear-after", grid.clear_after)->capture_default_str();
  c_grid->add_option("--events", grid.events, "event schedule CSV (replaces the fault)");
  c_grid->add_flag("--no-events", grid.no_events, "run without any event");
  c_grid->add_option("--dt", grid.dt)->capture_default_str();
  c_grid->add_option("--horizon", grid.horizon)->capture_default_str();
  c_grid->add_option("--seed", grid.seed)->capture_default_str();
  c_grid->add_option("--out", grid.out, "output prefix: <out>_series.csv, <out>_events.csv")->capture_default_str();

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "shape similarity between a model and a data trace");
  c_met->add_option("model", met.a)->required();
  c_met->add_option("data", met.b)->required();
  c_met->add_option("--channel", met.channel, "channel to compare (default p, else the first)");
  c_met->add_option("--max-lag-frac", met.max_lag_frac)->capture_default_str();
  c_met->add_option("--out", met.out, "metric report CSV");
  std::uint64_t metrics_seed = 1;
  c_met->add_option("--seed", metrics_seed, "accepted for uniformity; metrics are deterministic");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep-k", "median system metrics versus LEL count");
  c_sweep->add_option("case", sweep.case_name)->capture_default_str();
  c_sweep->add_option("--k", sweep.k)->delimiter(',')->capture_default_str();
  c_sweep->add_option("--trials", sweep.trials)->capture_default_str();
  c_sweep->add_option("--fault-bus", sweep.fault_bus)->capture_default_str();
  c_sweep->add_option("--t-fault", sweep.t_fault)->capture_default_str();
  c_sweep->add_option("--clear-after", sweep.clear_after)->capture_default_str();
  c_sweep->add_option("--dt", sweep.dt)->capture_default_str();
  c_sweep->add_option("--horizon", sweep.horizon)->capture_default_str();
  c_sweep->add_option("--seed", sweep.seed)->capture_default_str();
  c_sweep->add_option("--out", sweep.out, "sweep CSV (stdout if omitted)");

  ExperimentArgs tcl_args;
  std::vector<int> lengths{3, 5, 10}, dims{16, 64, 256};
  std::string tcl_out;
  auto* c_tcl = app.add_subcommand("sweep-tcl", "calibration quality over window length and embedding size");
  c_tcl->add_option("--L", lengths)->delimiter(',')->capture_default_str();
  c_tcl->add_option("--d", dims)->delimiter(',')->capture_default_str();
  add_experiment_options(c_tcl, tcl_args);
  c_tcl->add_option("--out", tcl_out, "grid CSV (stdout if omitted)");

  ExperimentArgs rob_args;
  int inits = 20;
  std::string rob_out, patterns_out;
  auto* c_rob = app.add_subcommand("robustness", "calibrations from many random starts");
  c_rob->add_option("--inits", inits)->capture_default_str();
  c_rob->add_option("--window-length", rob_args.window_length)->capture_default_str();
  c_rob->add_option("--dim", rob_args.dim, "embedding size")->capture_default_str();
  add_experiment_options(c_rob, rob_args);
  c_rob->add_option("--out", rob_out, "per-init CSV (stdout if omitted)");
  c_rob->add_option("--patterns-out", patterns_out, "pattern vectors before and after calibration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kInvalid;
  }

  try {
    if (*c_load) return simulate_load(load);
    if (*c_cal) return calibrate_cmd(cal);
    if (*c_grid) return grid_sim(grid);
    if (*c_met) return metrics_cmd(met);
    if (*c_sweep) return sweep_k(sweep);
    if (*c_tcl) return sweep_tcl(tcl_args, lengths, dims, tcl_out);
    if (*c_rob) return robustness(rob_args, inits, rob_out, patterns_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kInvalid;
}
