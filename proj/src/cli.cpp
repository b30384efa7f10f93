#include "smdiss/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "smdiss/controller.hpp"
#include "smdiss/dissipativity.hpp"
#include "smdiss/equilibrium.hpp"
#include "smdiss/errors.hpp"
#include "smdiss/scenario.hpp"
#include "smdiss/serialization.hpp"
#include "smdiss/simulation.hpp"

namespace smdiss {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  auto l = spdlog::get("smdiss");
  if (!l) {
    try {
      l = spdlog::stderr_color_mt("smdiss");
    } catch (const spdlog::spdlog_ex&) {
      l = spdlog::get("smdiss");
    }
  }
  return l;
}

class Output {
 public:
  Output(const CliOptions& opt, std::ostream& out) : out_(out) {
    if (opt.out_dir) {
      dir_ = *opt.out_dir;
      std::error_code ec;
      std::filesystem::create_directories(dir_, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir_.string() + "': " + ec.message());
    }
  }

  /// Writes to stdout and, with an output directory, to `name` inside it.
  void result(const std::string& name, const std::string& text) {
    out_ << text;
    artifact(name, text);
  }

  void artifact(const std::string& name, const std::string& text) {
    if (dir_.empty()) return;
    write_file((dir_ / name).string(), text);
    logger()->info("wrote {}", (dir_ / name).string());
  }

  bool has_dir() const { return !dir_.empty(); }

 private:
  std::ostream& out_;
  std::filesystem::path dir_;
};

Scenario load_with_overrides(const CliOptions& opt) {
  Scenario s = load_scenario(opt.scenario_path);
  if (!opt.kinds.empty()) {
    s.kinds.clear();
    for (const std::string& k : opt.kinds) s.kinds.push_back(parse_supply_kind(k));
    s.validate();
  }
  return s;
}

bool all_dissipative(const std::vector<DissipationReport>& reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const DissipationReport& r) { return r.verdict == Verdict::Dissipative; });
}

std::vector<DissipationReport> verify_all(const Trajectory& traj, const Scenario& s,
                                          const std::optional<Equilibrium>& eq) {
  std::vector<DissipationReport> reports;
  for (SupplyKind kind : s.kinds) {
    reports.push_back(verify_trajectory(traj, kind, eq, s.params, s.tolerances));
    logger()->info("{}: {} (max slack {}, integral residual {})", to_string(kind), to_string(reports.back().verdict),
                   reports.back().max_slack, reports.back().integral_residual);
  }
  return reports;
}

std::string reports_document(const Trajectory& traj, const std::vector<DissipationReport>& reports) {
  Json arr = Json::array();
  for (const DissipationReport& r : reports) arr.push_back(to_json(r));
  Json j;
  j["variant"] = std::string(to_string(traj.variant));
  j["n-samples"] = traj.size();
  j["reports"] = arr;
  return dump_json(j);
}

int cmd_simulate(const CliOptions& opt, Output& o) {
  const Scenario s = load_with_overrides(opt);
  const auto eq = resolve_equilibrium(s);
  const Trajectory traj = simulate(make_simulation_spec(s, eq, opt.seed), s.params);
  logger()->info("simulated {} samples of the {} model", traj.size(), to_string(traj.variant));
  const auto reports = verify_all(traj, s, eq);
  o.artifact("trace.csv", format_trace(traj, s.params));
  o.result("report.json", reports_document(traj, reports));
  return all_dissipative(reports) ? kExitOk : kExitNotDissipative;
}

int cmd_equilibrium(const CliOptions& opt, Output& o) {
  const Scenario s = load_with_overrides(opt);
  const auto branches = solve(s.params, s.T_m);
  Json arr = Json::array();
  for (const EquilibriumBranch& b : branches) {
    Json j = to_json(b.equilibrium);
    double res = 0.0;
    for (double r : residual(b.equilibrium, s.params)) res = std::max(res, std::abs(r));
    Json row;
    row["label"] = b.label == BranchLabel::Principal ? "principal" : "complement";
    for (auto& [k, v] : j.items()) row[k] = v;
    row["residual"] = number_json(res);
    arr.push_back(row);
  }
  Json doc;
  doc["t-m"] = number_json(s.T_m);
  doc["branches"] = arr;
  o.result("equilibrium.json", dump_json(doc));
  return kExitOk;
}

int cmd_check_condition(const CliOptions& opt, Output& o) {
  Scenario s = load_with_overrides(opt);
  if (!s.equilibrium) s.equilibrium = BranchLabel::Principal;
  const Equilibrium eq = *resolve_equilibrium(s);
  const ConditionVerdict v = condition_check(eq, s.params);
  Json doc;
  doc["equilibrium"] = to_json(eq);
  const Json verdict = to_json(v);
  for (auto& [k, val] : verdict.items()) doc[k] = val;
  o.result("condition.json", dump_json(doc));
  return v.holds ? kExitOk : kExitNotDissipative;
}

int cmd_verify(const CliOptions& opt, Output& o) {
  const Scenario s = load_with_overrides(opt);
  const auto eq = resolve_equilibrium(s);
  const SimulationSpec spec = make_simulation_spec(s, eq, opt.seed);
  Trajectory traj;
  if (opt.trace_path) {
    traj = read_trace(*opt.trace_path, s.variant);
    traj.mechanical_input = spec.mechanical_input;
    traj.equilibrium = eq;
    traj.gains = spec.gains;
    traj.swing = spec.swing;
  } else {
    traj = simulate(spec, s.params);
  }
  const auto reports = verify_all(traj, s, eq);
  o.result("verify.json", reports_document(traj, reports));
  return all_dissipative(reports) ? kExitOk : kExitNotDissipative;
}

int cmd_reduce(const CliOptions& opt, Output& o) {
  const Scenario s = load_with_overrides(opt);
  if (s.variant != ModelVariant::Dq) throw ValidationError("reduce runs on the dq variant", std::string(to_string(s.variant)));
  const auto eq = resolve_equilibrium(s);
  SimulationSpec full = make_simulation_spec(s, eq, opt.seed);
  full.kinds.clear();

  SimulationSpec reduced;
  reduced.variant = s.reduction.swing_variant;
  reduced.initial_state = {full.initial_state[0], full.initial_state[1]};
  reduced.mechanical_input = s.T_m;
  reduced.swing = make_swing_params(reduced.variant, swing_voltage(s), s.T_m, s.params);
  reduced.config = s.integrator;

  const Trajectory tf = simulate(full, s.params);
  const Trajectory tr = simulate(reduced, s.params);
  const double t1 = s.reduction.t1.value_or(s.integrator.t_end);
  const ReductionMetrics m = compare_reduction(tf, tr, s.reduction.t0, t1);

  Json doc;
  doc["swing-variant"] = std::string(to_string(reduced.variant));
  doc["V"] = number_json(reduced.swing->V);
  doc["p-max"] = number_json(reduced.swing->P_max);
  doc["p-max-stator-only"] = number_json(pmax_stator_only(reduced.swing->V, s.params));
  doc["window"] = Json::array({number_json(s.reduction.t0), number_json(t1)});
  const Json metrics = to_json(m);
  for (auto& [k, v] : metrics.items()) doc[k] = v;
  o.result("reduce.json", dump_json(doc));
  return kExitOk;
}

struct SweepRow {
  std::vector<std::string> cells;
  bool error = false;
  bool ok = true;
};

SweepRow sweep_row(const SweepSpec& sw, std::size_t index, const CliOptions& opt) {
  SweepRow row;
  const std::size_t n_value_cols = sw.aggregate == SweepAggregate::ConditionMargins ? 4 : 2 * sw.base.kinds.size();
  try {
    Scenario s = sweep_point(sw, index);
    s.validate();
    if (sw.aggregate == SweepAggregate::ConditionMargins) {
      if (!s.equilibrium) s.equilibrium = BranchLabel::Principal;
      const ConditionVerdict v = condition_check(*resolve_equilibrium(s), s.params);
      row.cells = {v.holds ? "true" : "false", v.strict ? "true" : "false", format_double(v.margin),
                   format_double(v.min_eigenvalue)};
      row.ok = v.holds;
    } else {
      const auto eq = resolve_equilibrium(s);
      const Trajectory traj = simulate(make_simulation_spec(s, eq, opt.seed), s.params);
      for (SupplyKind kind : s.kinds) {
        const DissipationReport r = verify_trajectory(traj, kind, eq, s.params, s.tolerances);
        row.cells.emplace_back(to_string(r.verdict));
        row.cells.push_back(format_double(r.max_slack));
        row.ok = row.ok && r.verdict == Verdict::Dissipative;
      }
    }
    row.cells.emplace_back();
  } catch (const Error& e) {
    row.cells.assign(n_value_cols, "");
    row.cells.emplace_back(cli_error_code(e.code()));
    row.error = true;
  } catch (const std::exception&) {
    row.cells.assign(n_value_cols, "");
    row.cells.emplace_back("INTERNAL");
    row.error = true;
  }
  return row;
}

int cmd_sweep(const CliOptions& opt, Output& o, std::ostream& out) {
  const std::string text = read_file(opt.scenario_path);
  SweepSpec sw = parse_sweep(text, opt.scenario_path);
  if (!opt.kinds.empty()) {
    sw.base.kinds.clear();
    for (const std::string& k : opt.kinds) sw.base.kinds.push_back(parse_supply_kind(k));
    sw.validate();
  }
  const std::size_t n = sw.grid_size();
  unsigned threads = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  logger()->info("sweeping {} grid points on {} threads", n, threads);

  std::vector<SweepRow> rows(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) rows[k] = sweep_row(sw, k, opt);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::string table = "index";
  for (const SweepAxis& a : sw.axes) table += "," + a.path;
  if (sw.aggregate == SweepAggregate::ConditionMargins) {
    table += ",holds,strict,margin,min_eigenvalue";
  } else {
    for (SupplyKind k : sw.base.kinds) {
      table += ",verdict_" + std::string(to_string(k)) + ",max_slack_" + std::string(to_string(k));
    }
  }
  table += ",error\r\n";
  bool any_error = false, all_ok = true;
  for (std::size_t k = 0; k < n; ++k) {
    table += std::to_string(k);
    std::size_t rem = k;
    std::vector<double> coords(sw.axes.size());
    for (std::size_t a = sw.axes.size(); a-- > 0;) {
      coords[a] = sw.axes[a].values[rem % sw.axes[a].values.size()];
      rem /= sw.axes[a].values.size();
    }
    for (double c : coords) table += "," + format_double(c);
    for (const std::string& c : rows[k].cells) table += "," + c;
    table += "\r\n";
    any_error = any_error || rows[k].error;
    all_ok = all_ok && rows[k].ok;
  }
  if (o.has_dir()) {
    o.artifact("sweep.csv", table);
  } else {
    out << table;
  }
  if (any_error) return kExitError;
  return all_ok ? kExitOk : kExitNotDissipative;
}

}  // namespace

void configure_logging() {
  auto l = logger();
  spdlog::set_default_logger(l);
  const char* env = std::getenv("SMDISS_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    l->set_level(spdlog::level::debug);
  } else if (level == "info") {
    l->set_level(spdlog::level::info);
  } else {
    l->set_level(spdlog::level::err);
    if (level != "error") l->error("SMDISS_LOG='{}' is not one of error, info, debug", level);
  }
}

std::string error_json(const std::exception& e) {
  Json detail;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    detail["code"] = std::string(cli_error_code(err->code()));
    detail["message"] = err->what();
    if (const auto* pe = dynamic_cast<const ParseError*>(err)) {
      detail["line"] = pe->line();
      detail["field"] = pe->field();
    } else if (const auto* ve = dynamic_cast<const ValidationError*>(err)) {
      detail["invariant"] = ve->invariant();
    } else if (const auto* se = dynamic_cast<const SingularSpeedError*>(err)) {
      detail["omega"] = number_json(se->omega());
      if (se->last_valid_time()) detail["last-valid-time"] = number_json(*se->last_valid_time());
    }
  } else {
    detail["code"] = "INTERNAL";
    detail["message"] = e.what();
  }
  Json j;
  j["error"] = detail;
  return j.dump() + "\n";
}

int run(const CliOptions& options, std::ostream& out, std::ostream& err) {
  configure_logging();
  try {
    Output o(options, out);
    const std::string& c = options.command;
    if (c == "simulate") return cmd_simulate(options, o);
    if (c == "equilibrium") return cmd_equilibrium(options, o);
    if (c == "check-condition") return cmd_check_condition(options, o);
    if (c == "verify") return cmd_verify(options, o);
    if (c == "reduce") return cmd_reduce(options, o);
    if (c == "sweep") return cmd_sweep(options, o, out);
    throw ValidationError("known subcommand", c);
  } catch (const std::exception& e) {
    logger()->debug("{} failed: {}", options.command, e.what());
    err << error_json(e);
    return kExitError;
  }
}

}  // namespace smdiss
