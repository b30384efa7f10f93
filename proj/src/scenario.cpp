#include "smdiss/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>

#include <json.hpp>

#include "smdiss/errors.hpp"
#include "smdiss/machine_model.hpp"

namespace smdiss {

using json = nlohmann::ordered_json;

namespace {

struct ParamField {
  const char* key;
  double MachineParams::*member;
};

constexpr ParamField kParamFields[] = {
    {"J", &MachineParams::J},     {"D", &MachineParams::D},     {"b", &MachineParams::b},
    {"L-s", &MachineParams::L_s}, {"L-l", &MachineParams::L_l}, {"R-s", &MachineParams::R_s},
    {"R-l", &MachineParams::R_l}, {"R-L", &MachineParams::R_L}, {"I", &MachineParams::I},
    {"omega-s", &MachineParams::omega_s},
};

int line_at(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

/// Walks "a.b.c" through the raw text, locating each quoted key after the
/// previous one. Good enough to point a reader at the offending line.
int line_of_field(const std::string& text, const std::string& path) {
  std::size_t pos = 0;
  std::stringstream ss(path);
  std::string seg;
  bool found = false;
  while (std::getline(ss, seg, '.')) {
    const std::size_t bracket = seg.find('[');
    if (bracket != std::string::npos) seg = seg.substr(0, bracket);
    const std::size_t at = text.find("\"" + seg + "\"", pos);
    if (at == std::string::npos) break;
    pos = at;
    found = true;
  }
  return found ? line_at(text, pos) : 0;
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    const int line = line_of_field(text_, path);
    throw ParseError(source_ + (line ? ":" + std::to_string(line) : std::string()) + ": " + path + ": " + what, line,
                     path);
  }

  json parse() const {
    try {
      return json::parse(text_);
    } catch (const json::parse_error& e) {
      const int line = line_at(text_, e.byte == 0 ? 0 : e.byte - 1);
      throw ParseError(source_ + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), line, "");
    }
  }

  void object(const json& j, const std::string& path) const {
    if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  }

  void keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    object(j, path);
    for (const auto& [k, v] : j.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
        fail(join(path, k), "unknown key");
      }
    }
  }

  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }

  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  template <class F>
  auto named(const json& j, const std::string& path, F&& parse_name) const {
    const std::string name = string(j, path);
    try {
      return parse_name(name);
    } catch (const ParseError& e) {
      fail(path, e.what());
    }
  }

  void read_number(const json& obj, const std::string& path, const char* key, double& out) const {
    if (obj.contains(key)) out = number(obj[key], join(path, key));
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  const std::string& text_;
  std::string source_;
};

json equilibrium_json(const Equilibrium& eq) {
  return json{{"delta-s", eq.delta_s}, {"omega-s", eq.omega_s}, {"id-s", eq.id_s}, {"iq-s", eq.iq_s}, {"t-m", eq.T_m}};
}

Equilibrium read_equilibrium(const Reader& r, const json& j, const std::string& path) {
  r.keys(j, path, {"delta-s", "omega-s", "id-s", "iq-s", "t-m"});
  for (const char* k : {"delta-s", "omega-s", "id-s", "iq-s", "t-m"}) {
    if (!j.contains(k)) r.fail(Reader::join(path, k), "missing key");
  }
  Equilibrium eq;
  eq.delta_s = r.number(j["delta-s"], path + ".delta-s");
  eq.omega_s = r.number(j["omega-s"], path + ".omega-s");
  eq.id_s = r.number(j["id-s"], path + ".id-s");
  eq.iq_s = r.number(j["iq-s"], path + ".iq-s");
  eq.T_m = r.number(j["t-m"], path + ".t-m");
  return eq;
}

Scenario read_scenario(const Reader& r, const json& j, const std::string& path) {
  r.keys(j, path,
         {"params", "variant", "t-m", "torque-deviation", "equilibrium", "initial-state", "gains", "integrator", "kinds",
          "tolerances", "swing", "reduction"});
  Scenario s;
  const std::string pp = Reader::join(path, "params");
  if (!j.contains("params")) r.fail(pp, "missing key");
  {
    const json& pj = j["params"];
    r.object(pj, pp);
    for (const auto& [k, v] : pj.items()) {
      const auto* f = std::find_if(std::begin(kParamFields), std::end(kParamFields),
                                   [&](const ParamField& pf) { return k == pf.key; });
      if (f == std::end(kParamFields)) r.fail(Reader::join(pp, k), "unknown key");
      s.params.*(f->member) = r.number(v, Reader::join(pp, k));
    }
  }
  if (j.contains("variant")) {
    s.variant = r.named(j["variant"], Reader::join(path, "variant"), parse_model_variant);
  }
  r.read_number(j, path, "t-m", s.T_m);
  r.read_number(j, path, "torque-deviation", s.torque_deviation);

  if (j.contains("equilibrium") && !j["equilibrium"].is_null()) {
    const json& ej = j["equilibrium"];
    const std::string ep = Reader::join(path, "equilibrium");
    if (ej.is_string()) {
      const std::string name = ej.get<std::string>();
      if (name == "principal") {
        s.equilibrium = BranchLabel::Principal;
      } else if (name == "complement") {
        s.equilibrium = BranchLabel::Complement;
      } else {
        r.fail(ep, "expected \"principal\", \"complement\" or an object");
      }
    } else {
      s.equilibrium = read_equilibrium(r, ej, ep);
    }
  }

  if (j.contains("initial-state")) {
    const json& ij = j["initial-state"];
    const std::string ip = Reader::join(path, "initial-state");
    if (ij.is_string()) {
      if (ij.get<std::string>() != "operating-point") r.fail(ip, "expected \"operating-point\", an array or an object");
    } else if (ij.is_array()) {
      s.initial_state.mode = InitialStateSpec::Mode::Explicit;
      for (std::size_t k = 0; k < ij.size(); ++k) {
        s.initial_state.values.push_back(r.number(ij[k], ip + "[" + std::to_string(k) + "]"));
      }
    } else {
      r.keys(ij, ip, {"random"});
      const std::string rp = ip + ".random";
      if (!ij.contains("random")) r.fail(rp, "missing key");
      const json& rj = ij["random"];
      r.keys(rj, rp, {"seed", "scale"});
      s.initial_state.mode = InitialStateSpec::Mode::Random;
      if (rj.contains("seed")) {
        if (!rj["seed"].is_number_unsigned()) r.fail(rp + ".seed", "expected an unsigned integer");
        s.initial_state.seed = rj["seed"].get<std::uint64_t>();
      }
      r.read_number(rj, rp, "scale", s.initial_state.scale);
    }
  }

  if (j.contains("gains")) {
    const std::string gp = Reader::join(path, "gains");
    r.keys(j["gains"], gp, {"k-p", "k-i"});
    r.read_number(j["gains"], gp, "k-p", s.gains.k_p);
    r.read_number(j["gains"], gp, "k-i", s.gains.k_i);
  }

  if (j.contains("integrator")) {
    const json& cj = j["integrator"];
    const std::string cp = Reader::join(path, "integrator");
    r.keys(cj, cp, {"method", "dt", "rtol", "atol", "t-end", "sample-stride"});
    if (cj.contains("method")) s.integrator.method = r.named(cj["method"], cp + ".method", parse_integrator_method);
    r.read_number(cj, cp, "dt", s.integrator.dt);
    r.read_number(cj, cp, "rtol", s.integrator.rtol);
    r.read_number(cj, cp, "atol", s.integrator.atol);
    r.read_number(cj, cp, "t-end", s.integrator.t_end);
    if (cj.contains("sample-stride")) {
      if (!cj["sample-stride"].is_number_integer()) r.fail(cp + ".sample-stride", "expected an integer");
      s.integrator.sample_stride = cj["sample-stride"].get<int>();
    }
  }

  if (j.contains("kinds")) {
    const json& kj = j["kinds"];
    const std::string kp = Reader::join(path, "kinds");
    if (!kj.is_array()) r.fail(kp, "expected an array");
    for (std::size_t k = 0; k < kj.size(); ++k) {
      s.kinds.push_back(r.named(kj[k], kp + "[" + std::to_string(k) + "]", parse_supply_kind));
    }
  } else {
    s.kinds = supported_kinds(s.variant);
  }

  if (j.contains("tolerances")) {
    const std::string tp = Reader::join(path, "tolerances");
    r.keys(j["tolerances"], tp, {"point-abs", "point-rel", "integral-rel"});
    r.read_number(j["tolerances"], tp, "point-abs", s.tolerances.point_abs);
    r.read_number(j["tolerances"], tp, "point-rel", s.tolerances.point_rel);
    r.read_number(j["tolerances"], tp, "integral-rel", s.tolerances.integral_rel);
  }

  if (j.contains("swing")) {
    const std::string sp = Reader::join(path, "swing");
    r.keys(j["swing"], sp, {"V"});
    if (j["swing"].contains("V")) s.swing_V = r.number(j["swing"]["V"], sp + ".V");
  }

  if (j.contains("reduction")) {
    const json& rj = j["reduction"];
    const std::string rp = Reader::join(path, "reduction");
    r.keys(rj, rp, {"swing-variant", "t0", "t1"});
    if (rj.contains("swing-variant")) {
      s.reduction.swing_variant = r.named(rj["swing-variant"], rp + ".swing-variant", parse_model_variant);
    }
    r.read_number(rj, rp, "t0", s.reduction.t0);
    if (rj.contains("t1")) s.reduction.t1 = r.number(rj["t1"], rp + ".t1");
  }
  return s;
}

json scenario_json(const Scenario& s) {
  json params = json::object();
  for (const ParamField& f : kParamFields) params[f.key] = s.params.*(f.member);

  json j;
  j["params"] = params;
  j["variant"] = std::string(to_string(s.variant));
  j["t-m"] = s.T_m;
  j["torque-deviation"] = s.torque_deviation;
  if (!s.equilibrium) {
    j["equilibrium"] = nullptr;
  } else if (const auto* label = std::get_if<BranchLabel>(&*s.equilibrium)) {
    j["equilibrium"] = *label == BranchLabel::Principal ? "principal" : "complement";
  } else {
    j["equilibrium"] = equilibrium_json(std::get<Equilibrium>(*s.equilibrium));
  }
  switch (s.initial_state.mode) {
    case InitialStateSpec::Mode::OperatingPoint: j["initial-state"] = "operating-point"; break;
    case InitialStateSpec::Mode::Explicit: j["initial-state"] = s.initial_state.values; break;
    case InitialStateSpec::Mode::Random:
      j["initial-state"] = {{"random", {{"seed", s.initial_state.seed}, {"scale", s.initial_state.scale}}}};
      break;
  }
  j["gains"] = {{"k-p", s.gains.k_p}, {"k-i", s.gains.k_i}};
  j["integrator"] = {{"method", std::string(to_string(s.integrator.method))},
                     {"dt", s.integrator.dt},
                     {"rtol", s.integrator.rtol},
                     {"atol", s.integrator.atol},
                     {"t-end", s.integrator.t_end},
                     {"sample-stride", s.integrator.sample_stride}};
  json kinds = json::array();
  for (SupplyKind k : s.kinds) kinds.push_back(std::string(to_string(k)));
  j["kinds"] = kinds;
  j["tolerances"] = {{"point-abs", s.tolerances.point_abs},
                     {"point-rel", s.tolerances.point_rel},
                     {"integral-rel", s.tolerances.integral_rel}};
  j["swing"] = json::object();
  if (s.swing_V) j["swing"]["V"] = *s.swing_V;
  j["reduction"] = {{"swing-variant", std::string(to_string(s.reduction.swing_variant))}, {"t0", s.reduction.t0}};
  if (s.reduction.t1) j["reduction"]["t1"] = *s.reduction.t1;
  return j;
}

bool is_shifted_variant(ModelVariant v) { return v == ModelVariant::Shifted || v == ModelVariant::ClosedLoop; }
bool is_swing_variant(ModelVariant v) {
  return v == ModelVariant::SwingImproved || v == ModelVariant::SwingClassical;
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

}  // namespace

void Scenario::validate() const {
  params.validate();
  integrator.validate();
  gains.validate();
  const std::string variant_name(to_string(variant));
  if (!std::isfinite(T_m)) throw ValidationError("t-m finite");
  if (!std::isfinite(torque_deviation)) throw ValidationError("torque-deviation finite");
  if (!(tolerances.point_abs >= 0.0) || !(tolerances.point_rel >= 0.0) || !(tolerances.integral_rel > 0.0)) {
    throw ValidationError("tolerances >= 0 and integral-rel > 0");
  }
  if (is_shifted_variant(variant) && !equilibrium) {
    throw ValidationError("shifted variants require an equilibrium", variant_name);
  }
  if (equilibrium) {
    if (const auto* eq = std::get_if<Equilibrium>(&*equilibrium)) {
      for (double v : {eq->delta_s, eq->omega_s, eq->id_s, eq->iq_s, eq->T_m}) {
        if (!std::isfinite(v)) throw ValidationError("equilibrium values finite");
      }
    }
  }
  const auto supported = supported_kinds(variant);
  for (SupplyKind k : kinds) {
    if (std::find(supported.begin(), supported.end(), k) == supported.end()) {
      throw ValidationError("kinds supported by variant", std::string(to_string(k)) + " on " + variant_name);
    }
  }
  const std::size_t n = state_dimension(variant);
  if (initial_state.mode == InitialStateSpec::Mode::Explicit) {
    if (initial_state.values.size() != n) {
      throw ValidationError("initial-state has " + std::to_string(n) + " components", variant_name);
    }
    for (double v : initial_state.values) {
      if (!std::isfinite(v)) throw ValidationError("initial-state finite");
    }
  }
  if (initial_state.mode == InitialStateSpec::Mode::Random && !(initial_state.scale >= 0.0)) {
    throw ValidationError("initial-state scale >= 0");
  }
  if (swing_V && !(*swing_V > 0.0)) throw ValidationError("swing V > 0");
  if (!is_swing_variant(reduction.swing_variant)) throw ValidationError("reduction swing-variant is a swing variant");
  if (!(reduction.t0 >= 0.0)) throw ValidationError("reduction t0 >= 0");
  const double t1 = reduction.t1.value_or(integrator.t_end);
  if (!(t1 > reduction.t0)) throw ValidationError("reduction t1 > t0");
  if (t1 > integrator.t_end) throw ValidationError("reduction t1 <= t-end");
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  const Reader r(text, source);
  Scenario s = read_scenario(r, r.parse(), "");
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path), path); }

std::string dump_scenario(const Scenario& s) { return scenario_json(s).dump(2) + "\n"; }

void save_scenario(const Scenario& s, const std::string& path) { write_file(path, dump_scenario(s)); }

std::optional<Equilibrium> resolve_equilibrium(const Scenario& s) {
  if (!s.equilibrium) return std::nullopt;
  if (const auto* eq = std::get_if<Equilibrium>(&*s.equilibrium)) return *eq;
  const BranchLabel want = std::get<BranchLabel>(*s.equilibrium);
  for (const EquilibriumBranch& b : solve(s.params, s.T_m)) {
    if (b.label == want) return b.equilibrium;
  }
  throw Error(ErrorCode::NoEquilibrium, "no complement branch at t-m = " + std::to_string(s.T_m));
}

std::vector<double> initial_state(const Scenario& s, const std::optional<Equilibrium>& eq,
                                  std::optional<std::uint64_t> seed) {
  if (s.initial_state.mode == InitialStateSpec::Mode::Explicit) return s.initial_state.values;

  const MachineParams& p = s.params;
  std::vector<double> x;
  switch (s.variant) {
    case ModelVariant::Abc: {
      if (eq) {
        const double theta = -eq->delta_s;
        const Vec3 i = inverse_park(theta, {eq->id_s, eq->iq_s});
        x = {theta, eq->omega_s, i[0], i[1], i[2]};
      } else {
        x = {0.0, p.omega_s, 0.0, 0.0, 0.0};
      }
      break;
    }
    case ModelVariant::Dq:
      x = eq ? std::vector<double>{eq->delta_s, eq->omega_s, eq->id_s, eq->iq_s}
             : std::vector<double>{0.0, p.omega_s, 0.0, 0.0};
      break;
    case ModelVariant::Shifted: x.assign(4, 0.0); break;
    case ModelVariant::ClosedLoop: x.assign(5, 0.0); break;
    case ModelVariant::SwingImproved:
    case ModelVariant::SwingClassical:
      x = eq ? std::vector<double>{eq->delta_s, eq->omega_s} : std::vector<double>{0.0, p.omega_s};
      break;
  }
  if (s.initial_state.mode == InitialStateSpec::Mode::Random) {
    std::mt19937_64 rng(seed.value_or(s.initial_state.seed));
    for (double& v : x) v += s.initial_state.scale * (2.0 * unit_uniform(rng) - 1.0);
  }
  return x;
}

double swing_voltage(const Scenario& s) noexcept { return s.swing_V.value_or(s.params.R_L * s.params.I); }

SimulationSpec make_simulation_spec(const Scenario& s, const std::optional<Equilibrium>& eq,
                                    std::optional<std::uint64_t> seed) {
  SimulationSpec spec;
  spec.variant = s.variant;
  spec.initial_state = initial_state(s, eq, seed);
  spec.mechanical_input = is_shifted_variant(s.variant) ? s.torque_deviation : s.T_m;
  spec.equilibrium = eq;
  if (s.variant == ModelVariant::ClosedLoop) spec.gains = s.gains;
  if (is_swing_variant(s.variant)) spec.swing = make_swing_params(s.variant, swing_voltage(s), s.T_m, s.params);
  spec.config = s.integrator;
  spec.kinds = s.kinds;
  return spec;
}

void set_field(Scenario& s, const std::string& path, double value) {
  if (path.rfind("params.", 0) == 0) {
    const std::string key = path.substr(7);
    for (const ParamField& f : kParamFields) {
      if (key == f.key) {
        s.params.*(f.member) = value;
        return;
      }
    }
  } else if (path == "t-m") {
    s.T_m = value;
    return;
  } else if (path == "torque-deviation") {
    s.torque_deviation = value;
    return;
  } else if (path == "gains.k-p") {
    s.gains.k_p = value;
    return;
  } else if (path == "gains.k-i") {
    s.gains.k_i = value;
    return;
  } else if (path == "swing.V") {
    s.swing_V = value;
    return;
  } else if (path == "integrator.dt") {
    s.integrator.dt = value;
    return;
  } else if (path == "integrator.t-end") {
    s.integrator.t_end = value;
    return;
  }
  throw ValidationError("axis path names a numeric scenario field", path);
}

std::size_t SweepSpec::grid_size() const noexcept {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const SweepAxis& a : axes) {
    if (a.values.empty()) return 0;
    if (n > (kSweepGridCap + 1) / a.values.size() + 1) return kSweepGridCap + 1;
    n *= a.values.size();
    if (n > kSweepGridCap) return kSweepGridCap + 1;
  }
  return n;
}

void SweepSpec::validate() const {
  if (axes.empty()) throw ValidationError("axes non-empty");
  Scenario probe = base;
  for (const SweepAxis& a : axes) {
    if (a.values.empty()) throw ValidationError("axis values non-empty", a.path);
    set_field(probe, a.path, a.values.front());
  }
  if (grid_size() > kSweepGridCap) throw ValidationError("grid size <= " + std::to_string(kSweepGridCap));
  base.validate();
}

Scenario sweep_point(const SweepSpec& sweep, std::size_t index) {
  Scenario s = sweep.base;
  for (std::size_t a = sweep.axes.size(); a-- > 0;) {
    const SweepAxis& axis = sweep.axes[a];
    set_field(s, axis.path, axis.values[index % axis.values.size()]);
    index /= axis.values.size();
  }
  return s;
}

bool is_sweep_document(const std::string& text) {
  try {
    const json j = json::parse(text);
    return j.is_object() && j.contains("sweep");
  } catch (const json::parse_error&) {
    return false;
  }
}

SweepSpec parse_sweep(const std::string& text, const std::string& source) {
  const Reader r(text, source);
  const json j = r.parse();
  r.keys(j, "", {"base", "sweep"});
  if (!j.contains("base")) r.fail("base", "missing key");
  if (!j.contains("sweep")) r.fail("sweep", "missing key");
  SweepSpec sw;
  sw.base = read_scenario(r, j["base"], "base");
  const json& sj = j["sweep"];
  r.keys(sj, "sweep", {"axes", "aggregate"});
  if (sj.contains("aggregate")) {
    const std::string name = r.string(sj["aggregate"], "sweep.aggregate");
    if (name == "condition-margins") {
      sw.aggregate = SweepAggregate::ConditionMargins;
    } else if (name == "dissipation-verdicts") {
      sw.aggregate = SweepAggregate::DissipationVerdicts;
    } else {
      r.fail("sweep.aggregate", "expected \"condition-margins\" or \"dissipation-verdicts\"");
    }
  }
  if (!sj.contains("axes") || !sj["axes"].is_array()) r.fail("sweep.axes", "expected an array");
  for (std::size_t k = 0; k < sj["axes"].size(); ++k) {
    const json& aj = sj["axes"][k];
    const std::string ap = "sweep.axes[" + std::to_string(k) + "]";
    r.keys(aj, ap, {"path", "values"});
    SweepAxis axis;
    if (!aj.contains("path")) r.fail(ap + ".path", "missing key");
    axis.path = r.string(aj["path"], ap + ".path");
    if (!aj.contains("values") || !aj["values"].is_array()) r.fail(ap + ".values", "expected an array");
    for (std::size_t v = 0; v < aj["values"].size(); ++v) {
      axis.values.push_back(r.number(aj["values"][v], ap + ".values[" + std::to_string(v) + "]"));
    }
    sw.axes.push_back(std::move(axis));
  }
  sw.validate();
  return sw;
}

std::string dump_sweep(const SweepSpec& sweep) {
  json axes = json::array();
  for (const SweepAxis& a : sweep.axes) axes.push_back({{"path", a.path}, {"values", a.values}});
  json j;
  j["base"] = scenario_json(sweep.base);
  j["sweep"] = {{"axes", axes},
                {"aggregate", sweep.aggregate == SweepAggregate::ConditionMargins ? "condition-margins"
                                                                                   : "dissipation-verdicts"}};
  return j.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "': " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing: " + std::strerror(errno));
  out << contents;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
}

}  // namespace smdiss
