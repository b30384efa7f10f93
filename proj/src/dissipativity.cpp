#include "smdiss/dissipativity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "smdiss/controller.hpp"
#include "smdiss/errors.hpp"
#include "smdiss/machine_model.hpp"
#include "smdiss/simulation.hpp"

namespace smdiss {

namespace {

constexpr double kIdentityTolerance = 1e-9;
constexpr double kEigenSignTolerance = 1e-12;

const DqState& original_state(SupplyKind kind, const PlantState& x) {
  if (const auto* s = std::get_if<DqState>(&x)) return *s;
  throw Error(ErrorCode::KindMismatch, std::string(to_string(kind)) + " expects an original dq state");
}

const ShiftedDqState& shifted_state(SupplyKind kind, const PlantState& x) {
  if (const auto* s = std::get_if<ShiftedDqState>(&x)) return *s;
  throw Error(ErrorCode::KindMismatch, std::string(to_string(kind)) + " expects a shifted state");
}

const Equilibrium& require_equilibrium(SupplyKind kind, const SupplyContext& ctx) {
  if (!ctx.equilibrium) {
    throw Error(ErrorCode::MissingEquilibrium, std::string(to_string(kind)) + " needs an equilibrium");
  }
  return *ctx.equilibrium;
}

const ControllerTerms& require_controller(const SupplyContext& ctx) {
  if (!ctx.controller) {
    throw Error(ErrorCode::MissingControllerState, "closed-loop-shifted needs controller gains and state");
  }
  return *ctx.controller;
}

double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

double plant_energy(double omega, double i_d, double i_q, const MachineParams& p) {
  return 0.5 * p.J * omega * omega + 0.5 * p.L() * (i_d * i_d + i_q * i_q);
}

double plant_power(double omega, double i_d, double i_q, double d_omega, double d_id, double d_iq,
                   const MachineParams& p) {
  return p.J * omega * d_omega + p.L() * (i_d * d_id + i_q * d_iq);
}

/// -vᵀ M v for v = (ĩ_d, ĩ_q, ω̃), with the magnitude of its terms.
SlackTerms negative_quadratic_form(const Mat3& m, const ShiftedDqState& xt) {
  const double v[3] = {xt.id_t, xt.iq_t, xt.omega_t};
  SlackTerms out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double term = m[r][c] * v[r] * v[c];
      out.value -= term;
      out.magnitude += std::abs(term);
    }
  }
  return out;
}

void add(SlackTerms& acc, double term) {
  acc.value += term;
  acc.magnitude += std::abs(term);
}

}  // namespace

std::string_view to_string(SupplyKind kind) noexcept {
  switch (kind) {
    case SupplyKind::PassivityOriginal: return "passivity-original";
    case SupplyKind::NNIOriginal: return "nni-original";
    case SupplyKind::PassivityShifted: return "passivity-shifted";
    case SupplyKind::NNIShifted: return "nni-shifted";
    case SupplyKind::ClosedLoopShifted: return "closed-loop-shifted";
  }
  return "unknown";
}

SupplyKind parse_supply_kind(std::string_view name) {
  for (SupplyKind k : kAllSupplyKinds) {
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown supply kind '" + std::string(name) + "'", 0, "kind");
}

bool is_shifted(SupplyKind kind) noexcept {
  return kind != SupplyKind::PassivityOriginal && kind != SupplyKind::NNIOriginal;
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Dissipative: return "dissipative";
    case Verdict::ViolationFound: return "violation-found";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

Verdict parse_verdict(std::string_view name) {
  for (Verdict v : {Verdict::Dissipative, Verdict::ViolationFound, Verdict::Inconclusive}) {
    if (to_string(v) == name) return v;
  }
  throw ParseError("unknown verdict '" + std::string(name) + "'", 0, "verdict");
}

double storage(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p) {
  if (!is_shifted(kind)) {
    const DqState& s = original_state(kind, x);
    return plant_energy(s.omega, s.i_d, s.i_q, p);
  }
  const ShiftedDqState& s = shifted_state(kind, x);
  double v = plant_energy(s.omega_t, s.id_t, s.iq_t, p);
  if (kind == SupplyKind::ClosedLoopShifted) {
    const ControllerTerms& c = require_controller(ctx);
    v += controller_storage(c.state, c.gains);
  }
  return v;
}

double supply(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p) {
  switch (kind) {
    case SupplyKind::PassivityOriginal: {
      const PortSample ports = port_outputs(original_state(kind, x), p);
      return dot(ports.y1, ports.u1);
    }
    case SupplyKind::NNIOriginal: {
      // θ' u2 with θ' = ω and u2 = (V_d I_d + V_q I_q)/ω; the speed cancels.
      const PortSample ports = port_outputs(original_state(kind, x), p);
      return ports.v_dq[0] * ports.u1[0] + ports.v_dq[1] * ports.u1[1];
    }
    case SupplyKind::PassivityShifted:
    case SupplyKind::ClosedLoopShifted: {
      const PortSample ports = shifted_ports(shifted_state(kind, x), require_equilibrium(kind, ctx), p);
      return dot(ports.y1, ports.u1);
    }
    case SupplyKind::NNIShifted: {
      const ShiftedDqState& s = shifted_state(kind, x);
      const PortSample ports = shifted_ports(s, require_equilibrium(kind, ctx), p);
      return p.R_L * (ports.u1[0] * (ports.u1[0] - s.id_t) + ports.u1[1] * (ports.u1[1] - s.iq_t));
    }
  }
  return 0.0;
}

double storage_rate(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p) {
  if (!is_shifted(kind)) {
    const DqState& s = original_state(kind, x);
    const DqState d = dq_rhs(s, ctx.input, p);
    return plant_power(s.omega, s.i_d, s.i_q, d.omega, d.i_d, d.i_q, p);
  }
  const ShiftedDqState& s = shifted_state(kind, x);
  const Equilibrium& eq = require_equilibrium(kind, ctx);
  if (kind == SupplyKind::ClosedLoopShifted) {
    const ControllerTerms& c = require_controller(ctx);
    const ClosedLoopDerivative d = closed_loop_rhs(s, c.state, eq, c.gains, p, ctx.input);
    return plant_power(s.omega_t, s.id_t, s.iq_t, d.plant.omega_t, d.plant.id_t, d.plant.iq_t, p) +
           c.gains.k_i * c.state.z * d.z;
  }
  const ShiftedDqState d = shifted_rhs(s, eq, p, ctx.input);
  return plant_power(s.omega_t, s.id_t, s.iq_t, d.omega_t, d.id_t, d.iq_t, p);
}

SlackTerms slack_closed_form(SupplyKind kind, const PlantState& x, const SupplyContext& ctx,
                             const MachineParams& p) {
  SlackTerms out;
  if (!is_shifted(kind)) {
    // Both original supplies equal V_dqᵀ I_dq, so they share one identity.
    const DqState& s = original_state(kind, x);
    const Vec2 u1 = port_outputs(s, p).u1;
    const double ed = s.i_d + u1[0];
    const double eq_ = s.i_q + u1[1];
    add(out, -p.D * s.omega * s.omega);
    add(out, -p.R_sl() * (s.i_d * s.i_d + s.i_q * s.i_q));
    add(out, -p.R_L * (ed * ed + eq_ * eq_));
    add(out, ctx.input * s.omega);
    return out;
  }

  const ShiftedDqState& s = shifted_state(kind, x);
  const Equilibrium& eq = require_equilibrium(kind, ctx);
  const Vec2 u1 = shifted_ports(s, eq, p).u1;
  out = negative_quadratic_form(quadratic_form_matrix(eq, p), s);
  switch (kind) {
    case SupplyKind::PassivityShifted:
    case SupplyKind::ClosedLoopShifted: {
      const double ed = s.id_t + u1[0];
      const double eq_ = s.iq_t + u1[1];
      add(out, -p.R_L * (ed * ed + eq_ * eq_));
      break;
    }
    case SupplyKind::NNIShifted:
      add(out, -p.R_L * (s.id_t * s.id_t + s.iq_t * s.iq_t));
      add(out, -p.R_L * dot(u1, u1));
      break;
    default:
      break;
  }
  if (kind == SupplyKind::ClosedLoopShifted) {
    const ControllerTerms& c = require_controller(ctx);
    add(out, -c.gains.k_p * s.omega_t * s.omega_t);
  }
  add(out, ctx.input * s.omega_t);
  return out;
}

DissipationSample evaluate_sample(SupplyKind kind, double t, const PlantState& x, const SupplyContext& ctx,
                                  const MachineParams& p) {
  DissipationSample s;
  s.t = t;
  s.storage = storage(kind, x, ctx, p);
  s.storage_rate = storage_rate(kind, x, ctx, p);
  s.supply = supply(kind, x, ctx, p);
  s.slack = s.storage_rate - s.supply;

  const SlackTerms closed = slack_closed_form(kind, x, ctx, p);
  const double scale = 1.0 + closed.magnitude + std::abs(s.storage_rate) + std::abs(s.supply);
  if (!(std::abs(s.slack - closed.value) <= kIdentityTolerance * scale)) {
    throw Error(ErrorCode::IdentityMismatch,
                std::string(to_string(kind)) + ": storage_rate - supply = " + std::to_string(s.slack) +
                    " but the completed-square form gives " + std::to_string(closed.value));
  }
  return s;
}

double dissipation_slack(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p) {
  return evaluate_sample(kind, 0.0, x, ctx, p).slack;
}

Mat3 quadratic_form_matrix(const Equilibrium& eq, const MachineParams& p) noexcept {
  const double L = p.L();
  const double r = p.R_sl();
  // Off-diagonal signs follow the coupling convention; with the Park sign
  // they read (L iq/2, -L id/2).
  const double m13 = -kCouplingSign * L * eq.iq_s / 2.0;
  const double m23 = kCouplingSign * L * eq.id_s / 2.0;
  return {{{r, 0.0, m13}, {0.0, r, m23}, {m13, m23, p.D}}};
}

std::array<double, 3> symmetric_eigenvalues(const Mat3& a) noexcept {
  const double p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
  std::array<double, 3> eig;
  if (p1 == 0.0) {
    eig = {a[0][0], a[1][1], a[2][2]};
  } else {
    const double q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    const double d0 = a[0][0] - q, d1 = a[1][1] - q, d2 = a[2][2] - q;
    const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    const double pp = std::sqrt(p2 / 6.0);
    Mat3 b = a;
    for (int i = 0; i < 3; ++i) {
      b[i][i] -= q;
      for (int j = 0; j < 3; ++j) b[i][j] /= pp;
    }
    const double det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                         b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                         b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    const double r = std::clamp(det_b / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double largest = q + 2.0 * pp * std::cos(phi);
    const double smallest = q + 2.0 * pp * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    eig = {smallest, 3.0 * q - largest - smallest, largest};
  }
  std::sort(eig.begin(), eig.end());
  return eig;
}

ConditionVerdict condition_check(const Equilibrium& eq, const MachineParams& p) {
  const double L = p.L();
  const double r = p.R_sl();
  if (!(r > 0.0)) throw ValidationError("R_s + R_l > 0");
  ConditionVerdict v;
  v.margin = 4.0 * p.D * r / (L * L) - (eq.id_s * eq.id_s + eq.iq_s * eq.iq_s);
  v.holds = v.margin >= 0.0;
  v.strict = v.margin > 0.0;

  const Mat3 m = quadratic_form_matrix(eq, p);
  v.min_eigenvalue = symmetric_eigenvalues(m)[0];
  double scale = 1.0;
  for (const auto& row : m)
    for (double e : row) scale = std::max(scale, std::abs(e));
  const double tol = kEigenSignTolerance * scale;
  const bool agree = v.holds ? v.min_eigenvalue >= -tol : v.min_eigenvalue <= tol;
  if (!agree) {
    throw Error(ErrorCode::IdentityMismatch, "condition margin " + std::to_string(v.margin) +
                                                 " disagrees in sign with min eigenvalue " +
                                                 std::to_string(v.min_eigenvalue));
  }
  return v;
}

DissipationReport verify_trajectory(const Trajectory& traj, SupplyKind kind, const std::optional<Equilibrium>& eq,
                                    const MachineParams& p, const Tolerances& tol) {
  DissipationReport report;
  report.kind = kind;
  report.n_samples = traj.size();
  if (traj.size() == 0) {
    report.verdict = Verdict::Inconclusive;
    return report;
  }

  std::vector<DissipationSample> samples;
  samples.reserve(traj.size());
  bool pointwise_ok = true;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto [x, ctx] = plant_point(traj, k, kind, eq, p);
    const DissipationSample s = evaluate_sample(kind, traj.times[k], x, ctx, p);
    const double allowed = tol.point_abs + tol.point_rel * (std::abs(s.storage_rate) + std::abs(s.supply));
    if (!(s.slack <= allowed)) pointwise_ok = false;
    if (k == 0 || s.slack > report.worst_sample.slack) report.worst_sample = s;
    samples.push_back(s);
  }
  report.max_slack = report.worst_sample.slack;

  const std::size_t n = samples.size();
  auto trapezoid = [&](std::size_t stride) {
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + stride < n; k += stride) {
      acc += 0.5 * (samples[k].supply + samples[k + stride].supply) * (samples[k + stride].t - samples[k].t);
    }
    for (; k + 1 < n; ++k) {
      acc += 0.5 * (samples[k].supply + samples[k + 1].supply) * (samples[k + 1].t - samples[k].t);
    }
    return acc;
  };
  const double supplied = trapezoid(1);
  report.integral_residual = (samples.back().storage - samples.front().storage) - supplied;
  const double tol_int = tol.integral_rel * (1.0 + std::abs(samples.front().storage));

  if (n >= 3) {
    report.quadrature_error = std::abs(supplied - trapezoid(2)) / 3.0;
    if (report.quadrature_error > std::max(tol_int / 10.0, 0.1 * std::abs(report.integral_residual))) {
      throw Error(ErrorCode::InsufficientSampling,
                  "supply integral error estimate " + std::to_string(report.quadrature_error) +
                      " exceeds the allowed " + std::to_string(tol_int / 10.0));
    }
  }

  report.verdict =
      pointwise_ok && report.integral_residual <= tol_int ? Verdict::Dissipative : Verdict::ViolationFound;
  return report;
}

}  // namespace smdiss
