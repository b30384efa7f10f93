#include "smdiss/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smdiss/controller.hpp"
#include "smdiss/machine_model.hpp"

namespace smdiss {

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt > 0");
  if (!(rtol > 0.0)) throw ValidationError("rtol > 0");
  if (!(atol > 0.0)) throw ValidationError("atol > 0");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ValidationError("t_end > 0");
  if (sample_stride < 1) throw ValidationError("sample_stride >= 1");
}

std::string_view to_string(IntegratorMethod m) noexcept {
  return m == IntegratorMethod::FixedRk4 ? "fixed-rk4" : "adaptive-rk4";
}

IntegratorMethod parse_integrator_method(std::string_view name) {
  if (name == "fixed-rk4") return IntegratorMethod::FixedRk4;
  if (name == "adaptive-rk4") return IntegratorMethod::AdaptiveRk4;
  throw ParseError("unknown integrator method '" + std::string(name) + "'", 0, "method");
}

std::string_view to_string(ModelVariant v) noexcept {
  switch (v) {
    case ModelVariant::Abc: return "abc";
    case ModelVariant::Dq: return "dq";
    case ModelVariant::Shifted: return "shifted";
    case ModelVariant::ClosedLoop: return "closed-loop";
    case ModelVariant::SwingImproved: return "swing-improved";
    case ModelVariant::SwingClassical: return "swing-classical";
  }
  return "unknown";
}

ModelVariant parse_model_variant(std::string_view name) {
  for (ModelVariant v : {ModelVariant::Abc, ModelVariant::Dq, ModelVariant::Shifted, ModelVariant::ClosedLoop,
                         ModelVariant::SwingImproved, ModelVariant::SwingClassical}) {
    if (to_string(v) == name) return v;
  }
  throw ParseError("unknown model variant '" + std::string(name) + "'", 0, "variant");
}

std::size_t state_dimension(ModelVariant v) noexcept {
  switch (v) {
    case ModelVariant::Abc: return 5;
    case ModelVariant::Dq: return 4;
    case ModelVariant::Shifted: return 4;
    case ModelVariant::ClosedLoop: return 5;
    case ModelVariant::SwingImproved:
    case ModelVariant::SwingClassical: return 2;
  }
  return 0;
}

std::vector<SupplyKind> supported_kinds(ModelVariant v) {
  switch (v) {
    case ModelVariant::Abc:
    case ModelVariant::Dq: return {SupplyKind::PassivityOriginal, SupplyKind::NNIOriginal};
    case ModelVariant::Shifted: return {SupplyKind::PassivityShifted, SupplyKind::NNIShifted};
    case ModelVariant::ClosedLoop: return {SupplyKind::ClosedLoopShifted};
    case ModelVariant::SwingImproved:
    case ModelVariant::SwingClassical: return {};
  }
  return {};
}

SwingParams make_swing_params(ModelVariant variant, double V, double T_m, const MachineParams& p) {
  if (variant != ModelVariant::SwingImproved && variant != ModelVariant::SwingClassical) {
    throw Error(ErrorCode::KindMismatch, "swing parameters need a swing variant");
  }
  SwingParams s;
  s.variant = variant;
  s.V = V;
  s.P_max = p.b * V / p.L();
  s.D_tilde = p.D * p.omega_s;
  s.P_m = T_m * p.omega_s;
  return s;
}

double pmax_stator_only(double V, const MachineParams& p) noexcept {
  const double m_f_i_f = p.b / std::sqrt(1.5);
  return m_f_i_f * V / (p.omega_s * p.L_s);
}

SwingState swing_rhs(const SwingState& x, const SwingParams& swing, const MachineParams& p) {
  SwingState dx;
  dx.delta = p.omega_s - x.omega;
  if (swing.variant == ModelVariant::SwingClassical) {
    dx.omega = (-swing.D_tilde * x.omega - kCouplingSign * swing.P_max * std::sin(x.delta) + swing.P_m) /
               (p.J * p.omega_s);
    return dx;
  }
  if (std::abs(x.omega) <= kOmegaFloor) throw SingularSpeedError(x.omega);
  const double T_m = swing.P_m / p.omega_s;
  dx.omega = (-p.D * x.omega - kCouplingSign * p.b * swing.V * std::sin(x.delta) / (p.L() * x.omega) + T_m) / p.J;
  return dx;
}

Vec2 swing_currents(const SwingState& x, const SwingParams& swing, const MachineParams& p) {
  const double w = swing.variant == ModelVariant::SwingClassical ? p.omega_s : x.omega;
  if (std::abs(w) <= kOmegaFloor) throw SingularSpeedError(w);
  const double Lw = p.L() * w;
  return {kCouplingSign * (p.b * w - swing.V * std::cos(x.delta)) / Lw, kCouplingSign * swing.V * std::sin(x.delta) / Lw};
}

DqState dq_view(const Trajectory& traj, std::size_t k, const MachineParams& p) {
  const std::vector<double>& r = traj.states.at(k);
  switch (traj.variant) {
    case ModelVariant::Abc: {
      const Vec2 i = park(r[0], {r[2], r[3], r[4]});
      return {p.omega_s * traj.times[k] - r[0], r[1], i[0], i[1]};
    }
    case ModelVariant::Dq: return {r[0], r[1], r[2], r[3]};
    case ModelVariant::Shifted:
    case ModelVariant::ClosedLoop: {
      if (!traj.equilibrium) throw Error(ErrorCode::MissingEquilibrium, "shifted trajectory without equilibrium");
      return reconstruct({r[0], r[1], r[2], r[3]}, *traj.equilibrium);
    }
    case ModelVariant::SwingImproved:
    case ModelVariant::SwingClassical: {
      if (!traj.swing) throw Error(ErrorCode::KindMismatch, "swing trajectory without swing parameters");
      const Vec2 i = swing_currents({r[0], r[1]}, *traj.swing, p);
      return {r[0], r[1], i[0], i[1]};
    }
  }
  return {};
}

std::pair<PlantState, SupplyContext> plant_point(const Trajectory& traj, std::size_t k, SupplyKind kind,
                                                 const std::optional<Equilibrium>& eq, const MachineParams& p) {
  const auto kinds = supported_kinds(traj.variant);
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw Error(ErrorCode::KindMismatch, std::string(to_string(kind)) + " is not defined on a " +
                                             std::string(to_string(traj.variant)) + " trajectory");
  }
  SupplyContext ctx;
  ctx.input = traj.mechanical_input;
  if (!is_shifted(kind)) return {dq_view(traj, k, p), ctx};

  ctx.equilibrium = eq ? eq : traj.equilibrium;
  if (!ctx.equilibrium) {
    throw Error(ErrorCode::MissingEquilibrium, std::string(to_string(kind)) + " needs an equilibrium");
  }
  const std::vector<double>& r = traj.states.at(k);
  const ShiftedDqState xt{r[0], r[1], r[2], r[3]};
  if (kind == SupplyKind::ClosedLoopShifted) {
    if (!traj.gains) throw Error(ErrorCode::MissingControllerState, "closed-loop trajectory without gains");
    ctx.controller = ControllerTerms{*traj.gains, ControllerState{r[4]}};
  }
  return {xt, ctx};
}

namespace {

template <std::size_t N>
std::array<double, N> to_array(const std::vector<double>& v, ModelVariant variant) {
  if (v.size() != N) {
    throw ValidationError("initial state has " + std::to_string(N) + " components",
                          std::string(to_string(variant)) + " variant, got " + std::to_string(v.size()));
  }
  std::array<double, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

template <std::size_t N>
void store(Trajectory& traj, IntegrationResult<N>&& result) {
  traj.times = std::move(result.times);
  traj.states.clear();
  traj.states.reserve(result.states.size());
  for (const auto& s : result.states) traj.states.emplace_back(s.begin(), s.end());
}

const Equilibrium& need_equilibrium(const SimulationSpec& spec) {
  if (!spec.equilibrium) throw Error(ErrorCode::MissingEquilibrium, "shifted simulation needs an equilibrium");
  return *spec.equilibrium;
}

}  // namespace

Trajectory simulate(const SimulationSpec& spec, const MachineParams& p) {
  Trajectory traj;
  traj.variant = spec.variant;
  traj.mechanical_input = spec.mechanical_input;
  traj.equilibrium = spec.equilibrium;
  traj.gains = spec.gains;
  traj.swing = spec.swing;
  const double T_m = spec.mechanical_input;

  switch (spec.variant) {
    case ModelVariant::Abc: {
      auto rhs = [&](double t, const std::array<double, 5>& x) {
        const AbcState d = abc_rhs({x[0], x[1], x[2], x[3], x[4]}, t, T_m, p);
        return std::array<double, 5>{d.theta, d.omega, d.i_a, d.i_b, d.i_c};
      };
      store(traj, integrate(rhs, to_array<5>(spec.initial_state, spec.variant), spec.config));
      break;
    }
    case ModelVariant::Dq: {
      auto rhs = [&](double, const std::array<double, 4>& x) {
        const DqState d = dq_rhs({x[0], x[1], x[2], x[3]}, T_m, p);
        return std::array<double, 4>{d.delta, d.omega, d.i_d, d.i_q};
      };
      store(traj, integrate(rhs, to_array<4>(spec.initial_state, spec.variant), spec.config));
      break;
    }
    case ModelVariant::Shifted: {
      const Equilibrium& eq = need_equilibrium(spec);
      auto rhs = [&](double, const std::array<double, 4>& x) {
        const ShiftedDqState d = shifted_rhs({x[0], x[1], x[2], x[3]}, eq, p, T_m);
        return std::array<double, 4>{d.delta_t, d.omega_t, d.id_t, d.iq_t};
      };
      store(traj, integrate(rhs, to_array<4>(spec.initial_state, spec.variant), spec.config));
      break;
    }
    case ModelVariant::ClosedLoop: {
      const Equilibrium& eq = need_equilibrium(spec);
      const DroopPI gains = spec.gains.value_or(DroopPI{});
      traj.gains = gains;
      auto rhs = [&](double, const std::array<double, 5>& x) {
        const ClosedLoopDerivative d = closed_loop_rhs({x[0], x[1], x[2], x[3]}, {x[4]}, eq, gains, p, T_m);
        return std::array<double, 5>{d.plant.delta_t, d.plant.omega_t, d.plant.id_t, d.plant.iq_t, d.z};
      };
      store(traj, integrate(rhs, to_array<5>(spec.initial_state, spec.variant), spec.config));
      break;
    }
    case ModelVariant::SwingImproved:
    case ModelVariant::SwingClassical: {
      const SwingParams swing = spec.swing.value_or(make_swing_params(spec.variant, p.R_L * p.I, T_m, p));
      if (swing.variant != spec.variant) throw Error(ErrorCode::KindMismatch, "swing parameters of another variant");
      traj.swing = swing;
      auto rhs = [&](double, const std::array<double, 2>& x) {
        const SwingState d = swing_rhs({x[0], x[1]}, swing, p);
        return std::array<double, 2>{d.delta, d.omega};
      };
      store(traj, integrate(rhs, to_array<2>(spec.initial_state, spec.variant), spec.config));
      break;
    }
  }
  annotate(traj, spec.kinds, p);
  return traj;
}

void annotate(Trajectory& traj, const std::vector<SupplyKind>& kinds, const MachineParams& p) {
  const std::size_t n = traj.size();
  traj.ports.assign(n, PortSample{});
  traj.storage.assign(n, 0.0);
  traj.annotations.clear();
  for (SupplyKind kind : kinds) traj.annotations.push_back({kind, std::vector<double>(n), std::vector<double>(n)});

  for (std::size_t k = 0; k < n; ++k) {
    const std::vector<double>& r = traj.states[k];
    switch (traj.variant) {
      case ModelVariant::Shifted:
      case ModelVariant::ClosedLoop: {
        const ShiftedDqState xt{r[0], r[1], r[2], r[3]};
        if (!traj.equilibrium) throw Error(ErrorCode::MissingEquilibrium, "shifted trajectory without equilibrium");
        traj.ports[k] = shifted_ports(xt, *traj.equilibrium, p);
        SupplyContext ctx;
        if (traj.variant == ModelVariant::ClosedLoop) {
          ctx.controller = ControllerTerms{traj.gains.value_or(DroopPI{}), ControllerState{r[4]}};
        }
        traj.storage[k] = storage(traj.variant == ModelVariant::ClosedLoop ? SupplyKind::ClosedLoopShifted
                                                                           : SupplyKind::PassivityShifted,
                                  xt, ctx, p);
        break;
      }
      default: {
        const DqState x = dq_view(traj, k, p);
        traj.ports[k] = port_outputs(x, p);
        traj.storage[k] = storage(SupplyKind::PassivityOriginal, x, {}, p);
        break;
      }
    }
    for (KindAnnotation& a : traj.annotations) {
      const auto [x, ctx] = plant_point(traj, k, a.kind, std::nullopt, p);
      const DissipationSample s = evaluate_sample(a.kind, traj.times[k], x, ctx, p);
      a.supply[k] = s.supply;
      a.slack[k] = s.slack;
    }
  }
}

ReductionMetrics compare_reduction(const Trajectory& full, const Trajectory& reduced, double t0, double t1) {
  auto columns_ok = [](const Trajectory& t) {
    return t.variant == ModelVariant::Dq || t.variant == ModelVariant::SwingImproved ||
           t.variant == ModelVariant::SwingClassical;
  };
  if (!columns_ok(full) || !columns_ok(reduced)) {
    throw Error(ErrorCode::KindMismatch, "reduction comparison needs dq or swing trajectories");
  }
  auto covers = [&](const Trajectory& t) {
    return t.size() >= 2 && t.times.front() <= t0 && t.times.back() >= t1;
  };
  if (!(t0 < t1) || !covers(full) || !covers(reduced)) {
    throw Error(ErrorCode::WindowOutOfRange, "window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                                                 "] is empty or not covered by both trajectories");
  }

  ReductionMetrics m;
  double err_d = 0.0, err_w = 0.0, ref_d = 0.0, ref_w = 0.0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < full.size(); ++k) {
    const double t = full.times[k];
    if (t < t0 || t > t1) continue;
    while (j + 2 < reduced.size() && reduced.times[j + 1] < t) ++j;
    const double ta = reduced.times[j], tb = reduced.times[j + 1];
    const double s = tb > ta ? std::clamp((t - ta) / (tb - ta), 0.0, 1.0) : 0.0;
    const double rd = reduced.states[j][0] + s * (reduced.states[j + 1][0] - reduced.states[j][0]);
    const double rw = reduced.states[j][1] + s * (reduced.states[j + 1][1] - reduced.states[j][1]);
    const double dd = full.states[k][0] - rd;
    const double dw = full.states[k][1] - rw;
    err_d += dd * dd;
    err_w += dw * dw;
    ref_d += full.states[k][0] * full.states[k][0];
    ref_w += full.states[k][1] * full.states[k][1];
    m.max_abs_delta = std::max(m.max_abs_delta, std::abs(dd));
    m.max_abs_omega = std::max(m.max_abs_omega, std::abs(dw));
    ++m.n_points;
  }
  if (m.n_points == 0) throw Error(ErrorCode::WindowOutOfRange, "no samples inside the comparison window");
  auto rel = [](double err, double ref) { return ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err); };
  m.rel_l2_delta = rel(err_d, ref_d);
  m.rel_l2_omega = rel(err_w, ref_w);
  m.rel_l2 = rel(err_d + err_w, ref_d + ref_w);
  return m;
}

}  // namespace smdiss
