#include "smdiss/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "smdiss/errors.hpp"
#include "smdiss/scenario.hpp"

namespace smdiss {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

bool has_z(ModelVariant v) { return v == ModelVariant::ClosedLoop; }

std::vector<std::string> state_columns(ModelVariant v) {
  std::vector<std::string> c{"delta", "omega", "i_d", "i_q"};
  if (has_z(v)) c.push_back("z");
  return c;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cell += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(cell);
  return out;
}

double parse_cell(const std::string& cell, const std::string& source, int line, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) {
    throw ParseError(source + ":" + std::to_string(line) + ": " + field + ": not a number '" + cell + "'", line, field);
  }
  return v;
}

}  // namespace

std::vector<std::string> trace_header(const Trajectory& traj) {
  std::vector<std::string> h{"t"};
  for (const std::string& c : state_columns(traj.variant)) h.push_back(c);
  for (const char* c : {"u1_d", "u1_q", "y1_d", "y1_q", "storage"}) h.emplace_back(c);
  for (const KindAnnotation& a : traj.annotations) {
    h.push_back("supply_" + std::string(to_string(a.kind)));
    h.push_back("slack_" + std::string(to_string(a.kind)));
  }
  return h;
}

std::string format_trace(const Trajectory& traj, const MachineParams& p) {
  const std::size_t n = traj.size();
  bool annotated = traj.ports.size() == n && traj.storage.size() == n;
  for (const KindAnnotation& a : traj.annotations) annotated = annotated && a.supply.size() == n && a.slack.size() == n;
  if (!annotated) throw ValidationError("trajectory annotated before writing");

  std::string out;
  const auto header = trace_header(traj);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += "\r\n";

  const bool shifted = traj.variant == ModelVariant::Shifted || traj.variant == ModelVariant::ClosedLoop;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> row{traj.times[k]};
    if (shifted) {
      row.insert(row.end(), traj.states[k].begin(), traj.states[k].end());
    } else {
      const DqState x = dq_view(traj, k, p);
      row.insert(row.end(), {x.delta, x.omega, x.i_d, x.i_q});
    }
    const PortSample& ps = traj.ports[k];
    row.insert(row.end(), {ps.u1[0], ps.u1[1], ps.y1[0], ps.y1[1], traj.storage[k]});
    for (const KindAnnotation& a : traj.annotations) row.insert(row.end(), {a.supply[k], a.slack[k]});
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_double(row[c]);
    }
    out += "\r\n";
  }
  return out;
}

void write_trace(const Trajectory& traj, const MachineParams& p, const std::string& path) {
  write_file(path, format_trace(traj, p));
}

Trajectory parse_trace(const std::string& text, ModelVariant variant, const std::string& source) {
  Trajectory traj;
  traj.variant = variant == ModelVariant::Abc ? ModelVariant::Dq : variant;
  const bool swing = traj.variant == ModelVariant::SwingImproved || traj.variant == ModelVariant::SwingClassical;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    header = split_row(line);
    break;
  }
  if (header.empty()) throw ParseError(source + ": missing header row", 0, "");

  std::vector<std::string> expected{"t"};
  for (const std::string& c : state_columns(traj.variant)) expected.push_back(c);
  for (const char* c : {"u1_d", "u1_q", "y1_d", "y1_q", "storage"}) expected.emplace_back(c);
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (c >= header.size() || header[c] != expected[c]) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected column '" + expected[c] + "'", line_no,
                       expected[c]);
    }
  }
  const std::size_t fixed = expected.size();
  if ((header.size() - fixed) % 2 != 0) {
    throw ParseError(source + ":" + std::to_string(line_no) + ": unpaired supply/slack columns", line_no,
                     header.back());
  }
  for (std::size_t c = fixed; c < header.size(); c += 2) {
    const std::string& sup = header[c];
    if (sup.rfind("supply_", 0) != 0 || header[c + 1] != "slack_" + sup.substr(7)) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected a supply_<kind>, slack_<kind> pair", line_no,
                       sup);
    }
    SupplyKind kind;
    try {
      kind = parse_supply_kind(sup.substr(7));
    } catch (const ParseError&) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": unknown supply kind in '" + sup + "'", line_no, sup);
    }
    traj.annotations.push_back({kind, {}, {}});
  }

  const std::size_t n_state = state_columns(traj.variant).size();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                           " cells, got " + std::to_string(cells.size()),
                       line_no, "");
    }
    std::vector<double> v(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) v[c] = parse_cell(cells[c], source, line_no, header[c]);
    traj.times.push_back(v[0]);
    if (swing) {
      traj.states.push_back({v[1], v[2]});
    } else {
      traj.states.emplace_back(v.begin() + 1, v.begin() + 1 + static_cast<long>(n_state));
    }
    PortSample ps;
    const std::size_t o = 1 + n_state;
    ps.u1 = {v[o], v[o + 1]};
    ps.y1 = {v[o + 2], v[o + 3]};
    traj.ports.push_back(ps);
    traj.storage.push_back(v[o + 4]);
    for (std::size_t a = 0; a < traj.annotations.size(); ++a) {
      traj.annotations[a].supply.push_back(v[fixed + 2 * a]);
      traj.annotations[a].slack.push_back(v[fixed + 2 * a + 1]);
    }
  }
  return traj;
}

Trajectory read_trace(const std::string& path, ModelVariant variant) {
  return parse_trace(read_file(path), variant, path);
}

Json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
  }
  throw ParseError(field + ": expected a number", 0, field);
}

namespace {

const Json& member(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(path + "." + key + ": missing key", 0, path + "." + key);
  return j[key];
}

double number_member(const Json& j, const char* key, const std::string& path) {
  return number_from_json(member(j, key, path), path + "." + key);
}

}  // namespace

Json to_json(const DissipationReport& r) {
  Json w;
  w["t"] = number_json(r.worst_sample.t);
  w["storage"] = number_json(r.worst_sample.storage);
  w["storage-rate"] = number_json(r.worst_sample.storage_rate);
  w["supply"] = number_json(r.worst_sample.supply);
  w["slack"] = number_json(r.worst_sample.slack);
  Json j;
  j["kind"] = std::string(to_string(r.kind));
  j["verdict"] = std::string(to_string(r.verdict));
  j["n-samples"] = r.n_samples;
  j["max-slack"] = number_json(r.max_slack);
  j["integral-residual"] = number_json(r.integral_residual);
  j["quadrature-error"] = number_json(r.quadrature_error);
  j["worst-sample"] = w;
  return j;
}

DissipationReport report_from_json(const Json& j) {
  const std::string path = "report";
  DissipationReport r;
  const Json& kind = member(j, "kind", path);
  const Json& verdict = member(j, "verdict", path);
  const Json& n = member(j, "n-samples", path);
  if (!kind.is_string()) throw ParseError("report.kind: expected a string", 0, "report.kind");
  if (!verdict.is_string()) throw ParseError("report.verdict: expected a string", 0, "report.verdict");
  if (!n.is_number_unsigned()) throw ParseError("report.n-samples: expected an unsigned integer", 0, "report.n-samples");
  r.kind = parse_supply_kind(kind.get<std::string>());
  r.verdict = parse_verdict(verdict.get<std::string>());
  r.n_samples = n.get<std::size_t>();
  r.max_slack = number_member(j, "max-slack", path);
  r.integral_residual = number_member(j, "integral-residual", path);
  r.quadrature_error = number_member(j, "quadrature-error", path);
  const Json& w = member(j, "worst-sample", path);
  const std::string wp = path + ".worst-sample";
  r.worst_sample.t = number_member(w, "t", wp);
  r.worst_sample.storage = number_member(w, "storage", wp);
  r.worst_sample.storage_rate = number_member(w, "storage-rate", wp);
  r.worst_sample.supply = number_member(w, "supply", wp);
  r.worst_sample.slack = number_member(w, "slack", wp);
  return r;
}

Json to_json(const ConditionVerdict& v) {
  Json j;
  j["holds"] = v.holds;
  j["strict"] = v.strict;
  j["margin"] = number_json(v.margin);
  j["min-eigenvalue"] = number_json(v.min_eigenvalue);
  return j;
}

ConditionVerdict condition_from_json(const Json& j) {
  const std::string path = "condition";
  ConditionVerdict v;
  const Json& holds = member(j, "holds", path);
  const Json& strict = member(j, "strict", path);
  if (!holds.is_boolean() || !strict.is_boolean()) throw ParseError("condition: expected booleans", 0, path);
  v.holds = holds.get<bool>();
  v.strict = strict.get<bool>();
  v.margin = number_member(j, "margin", path);
  v.min_eigenvalue = number_member(j, "min-eigenvalue", path);
  return v;
}

Json to_json(const Equilibrium& eq) {
  Json j;
  j["delta-s"] = number_json(eq.delta_s);
  j["omega-s"] = number_json(eq.omega_s);
  j["id-s"] = number_json(eq.id_s);
  j["iq-s"] = number_json(eq.iq_s);
  j["t-m"] = number_json(eq.T_m);
  return j;
}

Json to_json(const ReductionMetrics& m) {
  Json j;
  j["rel-l2"] = number_json(m.rel_l2);
  j["rel-l2-delta"] = number_json(m.rel_l2_delta);
  j["rel-l2-omega"] = number_json(m.rel_l2_omega);
  j["max-abs-delta"] = number_json(m.max_abs_delta);
  j["max-abs-omega"] = number_json(m.max_abs_omega);
  j["n-points"] = m.n_points;
  return j;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string dump_reports(const std::vector<DissipationReport>& reports) {
  Json arr = Json::array();
  for (const DissipationReport& r : reports) arr.push_back(to_json(r));
  Json j;
  j["reports"] = arr;
  return dump_json(j);
}

namespace {

Json parse_json_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), 0, "");
  }
}

}  // namespace

std::vector<DissipationReport> parse_reports(const std::string& text) {
  const Json j = parse_json_text(text);
  const Json& arr = member(j, "reports", "document");
  if (!arr.is_array()) throw ParseError("reports: expected an array", 0, "reports");
  std::vector<DissipationReport> out;
  for (const Json& r : arr) out.push_back(report_from_json(r));
  return out;
}

std::string dump_report(const DissipationReport& r) { return dump_json(to_json(r)); }

DissipationReport parse_report(const std::string& text) { return report_from_json(parse_json_text(text)); }

void write_report(const DissipationReport& r, const std::string& path) { write_file(path, dump_report(r)); }

}  // namespace smdiss
