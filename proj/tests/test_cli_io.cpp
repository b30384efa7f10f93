#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "smdiss/cli.hpp"
#include "smdiss/equilibrium.hpp"
#include "smdiss/errors.hpp"
#include "smdiss/scenario.hpp"
#include "smdiss/serialization.hpp"
#include "smdiss/simulation.hpp"

using namespace smdiss;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("smdiss_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct RunResult {
  int status;
  std::string out;
  std::string err;
};

RunResult invoke(CliOptions o) {
  std::ostringstream out, err;
  const int s = run(o, out, err);
  return {s, out.str(), err.str()};
}

const char* kDqScenario = R"({
  "params": {},
  "variant": "dq",
  "t-m": 0.0,
  "initial-state": [0.3, 1.0, 0.2, 0.1],
  "integrator": {"t-end": 2.0}
})";

}  // namespace

TEST_CASE("minimal scenario gets the documented defaults") {
  const Scenario s = parse_scenario(R"({"params": {}, "variant": "dq"})");
  CHECK(s.params == MachineParams{});
  CHECK(s.variant == ModelVariant::Dq);
  CHECK(s.T_m == 0.0);
  CHECK_FALSE(s.equilibrium.has_value());
  CHECK(s.initial_state.mode == InitialStateSpec::Mode::OperatingPoint);
  CHECK(s.integrator == IntegratorConfig{});
  CHECK(s.tolerances == Tolerances{});
  CHECK(s.kinds == supported_kinds(ModelVariant::Dq));
  CHECK(swing_voltage(s) == s.params.R_L * s.params.I);
}

TEST_CASE("scenario validation and parse errors") {
  try {
    parse_scenario(R"({"params": {"J": -1.0}, "variant": "dq"})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.invariant() == "J > 0");
  }
  try {
    parse_scenario("{\n  \"params\": {},\n  \"variant\": \"dq\",\n  \"bogus\": 1\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(e.field() == "bogus");
  }
  CHECK_THROWS_AS(parse_scenario("{not json"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"params": {}, "variant": "shifted"})"), ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"params": {}, "variant": "dq", "initial-state": [1, 2]})"), ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"params": {}, "variant": "dq", "kinds": ["nni-shifted"]})"), ValidationError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), Error);
}

TEST_CASE("scenario round trip") {
  Scenario s;
  s.params.J = 2.5;
  s.params.R_L = 0.7;
  s.variant = ModelVariant::ClosedLoop;
  s.T_m = 0.6;
  s.torque_deviation = 0.125;
  s.equilibrium = BranchLabel::Complement;
  s.initial_state.mode = InitialStateSpec::Mode::Random;
  s.initial_state.seed = 99;
  s.initial_state.scale = 0.3;
  s.gains = {0.4, 1.0 / 3.0};
  s.integrator.method = IntegratorMethod::AdaptiveRk4;
  s.integrator.dt = 1e-3;
  s.kinds = {SupplyKind::ClosedLoopShifted};
  s.tolerances.point_abs = 1e-8;
  s.swing_V = 0.9;
  s.reduction.t0 = 1.0;
  s.reduction.t1 = 4.0;
  s.validate();

  const std::string text = dump_scenario(s);
  const Scenario back = parse_scenario(text);
  CHECK(back == s);
  CHECK(dump_scenario(back) == text);

  Scenario explicit_eq;
  explicit_eq.variant = ModelVariant::Shifted;
  explicit_eq.kinds = supported_kinds(ModelVariant::Shifted);
  explicit_eq.equilibrium = solve(explicit_eq.params, 0.6).front().equilibrium;
  explicit_eq.initial_state.mode = InitialStateSpec::Mode::Explicit;
  explicit_eq.initial_state.values = {0.1, 0.2, 0.3, 0.4};
  CHECK(parse_scenario(dump_scenario(explicit_eq)) == explicit_eq);

  const fs::path dir = scratch("roundtrip");
  save_scenario(s, (dir / "s.json").string());
  CHECK(load_scenario((dir / "s.json").string()) == s);
}

TEST_CASE("trace format") {
  const MachineParams p;
  Trajectory empty;
  annotate(empty, {SupplyKind::PassivityOriginal}, p);
  const std::string text = format_trace(empty, p);
  CHECK(text ==
        "t,delta,omega,i_d,i_q,u1_d,u1_q,y1_d,y1_q,storage,supply_passivity-original,slack_passivity-original\r\n");

  Trajectory cl;
  cl.variant = ModelVariant::ClosedLoop;
  cl.equilibrium = solve(p, 0.6).front().equilibrium;
  cl.gains = DroopPI{1.0, 1.0};
  annotate(cl, {SupplyKind::ClosedLoopShifted, SupplyKind::PassivityShifted}, p);
  const std::vector<std::string> h = trace_header(cl);
  const std::vector<std::string> expected = {"t",       "delta", "omega", "i_d",  "i_q",  "z",
                                             "u1_d",    "u1_q",  "y1_d",  "y1_q", "storage",
                                             "supply_closed-loop-shifted", "slack_closed-loop-shifted",
                                             "supply_passivity-shifted",   "slack_passivity-shifted"};
  CHECK(h == expected);

  Trajectory raw;
  raw.times = {0.0};
  raw.states = {{0.0, 1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(format_trace(raw, p), ValidationError);
}

TEST_CASE("trace round trip and determinism") {
  const MachineParams p;
  SimulationSpec spec;
  spec.initial_state = {0.3, 1.0, 0.2, 0.1};
  spec.config.t_end = 1.0;
  spec.kinds = {SupplyKind::PassivityOriginal, SupplyKind::NNIOriginal};
  const Trajectory t = simulate(spec, p);
  const std::string a = format_trace(t, p);
  CHECK(a == format_trace(simulate(spec, p), p));

  const Trajectory back = parse_trace(a, ModelVariant::Dq);
  CHECK(back.times == t.times);
  CHECK(back.states == t.states);
  CHECK(back.storage == t.storage);
  CHECK(format_trace(back, p) == a);

  CHECK_THROWS_AS(parse_trace("t,delta\r\n", ModelVariant::Dq), ParseError);
  std::string broken = a;
  broken.replace(broken.rfind(','), 1, ",x");
  try {
    parse_trace(broken, ModelVariant::Dq);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() > 1);
  }
}

TEST_CASE("report serialization") {
  DissipationReport r;
  r.kind = SupplyKind::NNIShifted;
  r.n_samples = 17;
  r.max_slack = -1.0 / 3.0;
  r.integral_residual = 2.5e-300;
  r.quadrature_error = 0.1;
  r.verdict = Verdict::ViolationFound;
  r.worst_sample = {1.25, 0.5, -0.25, 1e-17, -0.75};
  const std::string text = dump_report(r);
  const DissipationReport back = parse_report(text);
  CHECK(back == r);
  CHECK(dump_report(back) == text);

  r.max_slack = std::numeric_limits<double>::infinity();
  r.integral_residual = std::nan("");
  const DissipationReport odd = parse_report(dump_report(r));
  CHECK(std::isinf(odd.max_slack));
  CHECK(std::isnan(odd.integral_residual));
  CHECK(dump_report(odd) == dump_report(r));

  std::vector<DissipationReport> many{back, back};
  many[1].kind = SupplyKind::PassivityOriginal;
  CHECK(parse_reports(dump_reports(many)) == many);

  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("cli subcommands") {
  const fs::path dir = scratch("commands");
  write_file((dir / "dq.json").string(), kDqScenario);

  CliOptions o;
  o.scenario_path = (dir / "dq.json").string();
  o.out_dir = (dir / "sim").string();
  o.command = "simulate";
  const RunResult sim = invoke(o);
  CHECK(sim.status == kExitOk);
  CHECK(sim.err.empty());
  CHECK(fs::exists(dir / "sim" / "trace.csv"));
  CHECK(read_file((dir / "sim" / "report.json").string()) == sim.out);
  const std::string trace1 = read_file((dir / "sim" / "trace.csv").string());
  CHECK(invoke(o).out == sim.out);
  CHECK(read_file((dir / "sim" / "trace.csv").string()) == trace1);

  CliOptions v = o;
  v.command = "verify";
  v.out_dir.reset();
  v.trace_path = (dir / "sim" / "trace.csv").string();
  CHECK(invoke(v).status == kExitOk);

  std::string corrupt = trace1;
  const std::size_t start = corrupt.rfind("\r\n", corrupt.size() - 3) + 2;
  const std::size_t c1 = corrupt.find(',', start) + 1;
  const std::size_t c2 = corrupt.find(',', c1) + 1;
  const std::size_t c3 = corrupt.find(',', c2);
  corrupt.replace(c2, c3 - c2, "25");
  write_file((dir / "corrupt.csv").string(), corrupt);
  v.trace_path = (dir / "corrupt.csv").string();
  const RunResult bad = invoke(v);
  CHECK(bad.status == kExitNotDissipative);
  CHECK(bad.out.find("violation-found") != std::string::npos);

  write_file((dir / "p0.json").string(), R"({"params": {}, "variant": "dq", "t-m": 0.6})");
  CliOptions c;
  c.command = "check-condition";
  c.scenario_path = (dir / "p0.json").string();
  const RunResult cond = invoke(c);
  CHECK(cond.status == kExitOk);
  const Json cj = Json::parse(cond.out);
  CHECK(cj["holds"] == true);
  const Equilibrium eq = solve(MachineParams{}, 0.6).front().equilibrium;
  const auto expected = condition_check(eq, MachineParams{});
  CHECK(cj["margin"].get<double>() == expected.margin);

  c.command = "equilibrium";
  const Json ej = Json::parse(invoke(c).out);
  CHECK(ej["branches"].size() == 2);

  write_file((dir / "none.json").string(), R"({"params": {"I": 1e-6}, "variant": "dq", "t-m": 0.6})");
  c.scenario_path = (dir / "none.json").string();
  const RunResult none = invoke(c);
  CHECK(none.status == kExitError);
  CHECK(Json::parse(none.err)["error"]["code"] == "NO_EQUILIBRIUM");

  c.command = "reduce";
  c.scenario_path = (dir / "p0.json").string();
  const RunResult red = invoke(c);
  CHECK(red.status == kExitOk);
  CHECK(Json::parse(red.out).contains("rel-l2"));

  c.command = "bogus";
  CHECK(invoke(c).status == kExitError);

  write_file((dir / "badkey.json").string(), "{\n \"params\": {},\n \"oops\": 1\n}");
  c.command = "simulate";
  c.scenario_path = (dir / "badkey.json").string();
  const RunResult pe = invoke(c);
  CHECK(pe.status == kExitError);
  const Json pj = Json::parse(pe.err);
  CHECK(pj["error"]["code"] == "PARSE_ERROR");
  CHECK(pj["error"]["line"] == 3);
}

TEST_CASE("sweeps") {
  const fs::path dir = scratch("sweep");
  write_file((dir / "sweep.json").string(), R"({
    "base": {"params": {}, "variant": "dq", "t-m": 0.6},
    "sweep": {"axes": [{"path": "params.D", "values": [0.1, 0.5, 0.55]},
                       {"path": "params.R-s", "values": [0.01, 0.05]}],
              "aggregate": "condition-margins"}
  })");
  const SweepSpec sw = parse_sweep(read_file((dir / "sweep.json").string()));
  CHECK(sw.grid_size() == 6);
  CHECK(sweep_point(sw, 1).params.R_s == 0.05);
  CHECK(sweep_point(sw, 1).params.D == 0.1);
  CHECK(sweep_point(sw, 2).params.D == 0.5);
  CHECK(parse_sweep(dump_sweep(sw)) == sw);

  CliOptions o;
  o.command = "sweep";
  o.scenario_path = (dir / "sweep.json").string();
  o.threads = 1;
  const RunResult one = invoke(o);
  o.threads = 4;
  const RunResult four = invoke(o);
  CHECK(one.out == four.out);
  CHECK(one.status != kExitError);

  SweepSpec big = sw;
  big.axes = {{"params.D", std::vector<double>(1001, 1.0)}, {"params.J", std::vector<double>(1000, 1.0)}};
  try {
    big.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.invariant() == "grid size <= 1000000");
  }
  big.axes.clear();
  CHECK_THROWS_AS(big.validate(), ValidationError);
}

TEST_CASE("every error code has its own CLI name") {
  std::set<std::string> names;
  for (int k = 0; k < kErrorCodeCount; ++k) {
    const std::string n(cli_error_code(static_cast<ErrorCode>(k)));
    CHECK_FALSE(n.empty());
    CHECK(n != "INTERNAL");
    names.insert(n);
    const Error e(static_cast<ErrorCode>(k), "x");
    CHECK(Json::parse(error_json(e))["error"]["code"] == n);
  }
  CHECK(names.size() == static_cast<std::size_t>(kErrorCodeCount));
  CHECK(Json::parse(error_json(std::runtime_error("boom")))["error"]["code"] == "INTERNAL");
}
