#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"
#include "lel/cli_io.h"
#include "lel/errors.h"
#include "lel/random.h"

using namespace lel;

namespace {

template <typename F>
std::string parse_error_of(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

// Random trace with awkward values: tiny, huge, negative and integral.
Trace random_trace(Rng& rng) {
  Trace t;
  const double periods[] = {1.0, 0.005, 0.1, 3.0, 1e-3};
  t.sample_period = periods[rng.next() % 5];
  t.t0 = static_cast<double>(rng.next() % 3) * t.sample_period;
  const std::size_t n = 2 + rng.next() % 40;
  const std::size_t channels = 1 + rng.next() % 4;
  for (std::size_t c = 0; c < channels; ++c) {
    Channel ch{"c" + std::to_string(c), {}};
    for (std::size_t k = 0; k < n; ++k) {
      switch (rng.next() % 4) {
        case 0: ch.values.push_back(rng.normal() * 1e-12); break;
        case 1: ch.values.push_back(rng.normal() * 1e9); break;
        case 2: ch.values.push_back(std::round(rng.uniform(-5.0, 5.0))); break;
        default: ch.values.push_back(rng.uniform(-1.0, 1.0)); break;
      }
    }
    t.channels.push_back(std::move(ch));
  }
  return t;
}

}  // namespace

TEST_CASE("a well-formed 3-row trace") {
  const Trace t = parse_trace("t,p,q\n0.5,1,2\n1.0,1.5,2.5\n1.5,2,3\n", {"p"});
  CHECK(t.length() == 3);
  CHECK(t.sample_period == 0.5);
  CHECK(t.t0 == 0.5);
  CHECK(t.channel("q")[2] == 3.0);
}

TEST_CASE("trace errors name the offending line") {
  CHECK(parse_error_of([] { parse_trace("t,p\n0,1\n1,2\n1,3\n"); }).find("line 4") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("t,p\n0,1\n1,nan\n2,3\n"); }).find("line 3 column 'p'") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("t,p\n0,1\n1,2\n2.5,3\n"); }).find("non-uniform") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("t,p\n0,1\n1,2\n", {"v"}); }).find("'v'") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("t,p\n0,1\n1\n"); }).find("line 3") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("time,p\n0,1\n1,2\n"); }).find("'t'") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("t,p,p\n0,1,1\n1,2,2\n"); }).find("duplicate") != std::string::npos);
  CHECK(parse_error_of([] { parse_trace("t,p\n0,1\n"); }).find("two rows") != std::string::npos);
}

TEST_CASE("trace write then read is the identity") {
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    Trace t = random_trace(rng);
    if (i % 3 == 0) t.origin = "case " + std::to_string(i);
    const Trace back = parse_trace(format_trace(t));
    REQUIRE(back.channels.size() == t.channels.size());
    CHECK(back.origin == t.origin);
    CHECK(back.t0 == t.t0);
    CHECK(std::abs(back.sample_period - t.sample_period) <= 1e-12 * t.sample_period);
    for (std::size_t c = 0; c < t.channels.size(); ++c) {
      CHECK(back.channels[c].name == t.channels[c].name);
      CHECK(back.channels[c].values == t.channels[c].values);
    }
  }
}

TEST_CASE("simulation results re-parse as traces without loss") {
  const GridCase g = load_case_file(std::string(LEL_DATA_DIR) + "/toy2.case");
  SimConfig cfg;
  cfg.dt = 0.01;
  cfg.horizon = 1.5;
  const SimResult r = run_simulation(g, fault_schedule(2, 0.5, 0.1), cfg);
  const Trace t = parse_trace(sim_result_csv(r), {"v_1", "v_2", "omega_1", "lel0_p", "lel0_kappa"});
  CHECK(t.length() == r.samples());
  CHECK(t.channel("v_2") == r.v_mag[1]);
  CHECK(t.channel("ang_2") == r.v_ang[1]);
  CHECK(t.channel("omega_1") == r.omega[0]);
  CHECK(t.channel("lel0_p") == r.lels[0].p);
  CHECK(t.channel("lel0_prot")[0] == static_cast<double>(r.lels[0].prot_mode[0]));

  const auto events = parse_event_log(event_log_csv(r.events));
  REQUIRE(events.size() == r.events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].t == r.events[i].t);
    CHECK(events[i].type == r.events[i].type);
    CHECK(events[i].lel == r.events[i].lel);
    CHECK(events[i].bus == r.events[i].bus);
  }
}

TEST_CASE("event log quoting survives commas and quotes") {
  std::vector<EventRecord> log{{1.25, EventType::Collapse, -1, -1, "Newton failed, residual \"0.3\""},
                               {2.0, EventType::Shed, 3, 16, ""}};
  const auto back = parse_event_log(event_log_csv(log));
  REQUIRE(back.size() == 2);
  CHECK(back[0].detail == log[0].detail);
  CHECK(back[1].lel == 3);
  CHECK(back[1].bus == 16);
  CHECK(back[1].type == EventType::Shed);
  CHECK(parse_error_of([] { parse_event_log("t,lel_id,bus,event_type,detail\n1,0,1,EXPLODE,\n"); })
            .find("line 2 column 'event_type'") != std::string::npos);
}

TEST_CASE("event schedules round-trip and reject malformed rows") {
  EventSchedule ev = fault_schedule(16, 5.0, 0.1);
  ev[0].y_fault = {0.5, -20.0};
  GridEvent trip;
  trip.t = 6.0;
  trip.kind = GridEvent::Kind::BranchTrip;
  trip.from = 16;
  trip.to = 17;
  ev.push_back(trip);
  const EventSchedule back = parse_event_schedule(format_event_schedule(ev));
  REQUIRE(back.size() == 3);
  CHECK(back[0].y_fault == ev[0].y_fault);
  CHECK(back[1].kind == GridEvent::Kind::Clear);
  CHECK(back[1].bus == 16);
  CHECK(back[1].t == ev[1].t);
  CHECK(back[2].from == 16);
  CHECK(back[2].to == 17);

  const EventSchedule bolted = parse_event_schedule("# bolted fault\nt,kind,bus,from,to,g,b\n1,FAULT,3,,,,\n");
  CHECK(bolted[0].y_fault == GridEvent{}.y_fault);
  CHECK(parse_error_of([] { parse_event_schedule("t,kind,bus,from,to,g,b\n1,FAULT,,,,,\n"); })
            .find("column 'bus'") != std::string::npos);
  CHECK(parse_error_of([] { parse_event_schedule("t,kind,bus,from,to,g,b\n1,SURGE,3,,,,\n"); })
            .find("SURGE") != std::string::npos);
  CHECK(parse_error_of([] { parse_event_schedule("t,kind,bus\n1,FAULT,3\n"); }).find("header") != std::string::npos);
}

TEST_CASE("sweep and metric tables") {
  SweepRow a;
  a.k = 2;
  a.voltage_nadir = 0.9;
  a.frequency_overshoot = 0.01;
  a.reconnection_delay = std::numeric_limits<double>::infinity();
  a.collapses = 1;
  CHECK(sweep_csv({a}) == "k,voltage_nadir,frequency_overshoot,reconnection_delay,collapses\n2,0.9,0.01,inf,1\n");
  CHECK(metric_report_csv({0.0, 1.0, 1.0}) == "metric,value\ndtw,0\nmax_xcorr,1\ncosine,1\n");
}
