#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "smdiss/dissipativity.hpp"
#include "smdiss/equilibrium.hpp"
#include "smdiss/errors.hpp"
#include "smdiss/machine_model.hpp"
#include "smdiss/simulation.hpp"
#include "support.hpp"

using namespace smdiss;

namespace {

SimulationSpec dq_spec(const DqState& x0, double T_m, double t_end, double dt = 1e-4) {
  SimulationSpec s;
  s.variant = ModelVariant::Dq;
  s.initial_state = {x0.delta, x0.omega, x0.i_d, x0.i_q};
  s.mechanical_input = T_m;
  s.config.t_end = t_end;
  s.config.dt = dt;
  return s;
}

double row_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("integrator config validation and names") {
  IntegratorConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.dt == 1e-4);
  CHECK(c.t_end == 10.0);
  CHECK(c.sample_stride == 10);
  CHECK(c.method == IntegratorMethod::FixedRk4);
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.rtol = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.t_end = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);

  for (IntegratorMethod m : {IntegratorMethod::FixedRk4, IntegratorMethod::AdaptiveRk4})
    CHECK(parse_integrator_method(to_string(m)) == m);
  for (ModelVariant v : {ModelVariant::Abc, ModelVariant::Dq, ModelVariant::Shifted, ModelVariant::ClosedLoop,
                         ModelVariant::SwingImproved, ModelVariant::SwingClassical})
    CHECK(parse_model_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_model_variant("dq0"), ParseError);
}

TEST_CASE("constant right-hand side gives a constant trajectory") {
  IntegratorConfig c;
  c.t_end = 1.0;
  c.dt = 0.01;
  for (IntegratorMethod m : {IntegratorMethod::FixedRk4, IntegratorMethod::AdaptiveRk4}) {
    c.method = m;
    const auto r = integrate([](double, const std::array<double, 3>&) { return std::array<double, 3>{}; },
                             std::array<double, 3>{1.5, -2.0, 0.25}, c);
    for (const auto& x : r.states) CHECK(x == std::array<double, 3>{1.5, -2.0, 0.25});
    CHECK(r.times.back() == 1.0);
  }
}

TEST_CASE("classic RK4 is fourth order on exponential decay") {
  auto decay = [](double, const std::array<double, 1>& x) { return std::array<double, 1>{-x[0]}; };
  double prev = 0.0;
  for (int k = 0; k < 5; ++k) {
    IntegratorConfig c;
    c.t_end = 1.0;
    c.dt = 0.1 / std::pow(2.0, k);
    const auto r = integrate(decay, std::array<double, 1>{1.0}, c);
    CHECK(r.times.back() == 1.0);
    const double err = std::abs(r.states.back()[0] - std::exp(-1.0));
    if (k > 0) {
      CHECK(prev / err > 14.0);
      CHECK(prev / err < 18.0);
    }
    prev = err;
  }
}

TEST_CASE("samples follow the stride and end at t_end") {
  IntegratorConfig c;
  c.t_end = 1.0;
  c.dt = 0.03;
  c.sample_stride = 4;
  const auto r = integrate([](double, const std::array<double, 1>&) { return std::array<double, 1>{1.0}; },
                           std::array<double, 1>{0.0}, c);
  CHECK(r.times.front() == 0.0);
  CHECK(r.times.back() == 1.0);
  for (std::size_t k = 1; k < r.times.size(); ++k) CHECK(r.times[k] > r.times[k - 1]);
  CHECK(std::abs(r.states.back()[0] - 1.0) < 1e-14);
  CHECK(r.times.size() == 1 + 8 + 1);
}

TEST_CASE("adaptive step doubling agrees with a fine fixed reference") {
  const MachineParams p;
  const DqState x0{0.5, 1.2, 0.3, -0.2};
  SimulationSpec ref = dq_spec(x0, 0.6, 2.0, 1e-5);
  SimulationSpec ad = dq_spec(x0, 0.6, 2.0, 1e-3);
  ad.config.method = IntegratorMethod::AdaptiveRk4;
  ad.config.rtol = 1e-10;
  ad.config.atol = 1e-12;
  const Trajectory a = simulate(ad, p);
  const Trajectory f = simulate(ref, p);
  CHECK(a.times.back() == 2.0);
  CHECK(row_diff(a.states.back(), f.states.back()) <= 1e-6);
}

TEST_CASE("equilibrium start stays put") {
  const MachineParams p;
  for (const EquilibriumBranch& b : solve(p, 0.6)) {
    const Trajectory t = simulate(dq_spec(b.equilibrium.as_state(), 0.6, 10.0), p);
    const DqState s = b.equilibrium.as_state();
    const std::vector<double> row{s.delta, s.omega, s.i_d, s.i_q};
    double dev = 0.0;
    for (const auto& r : t.states) dev = std::max(dev, row_diff(r, row));
    CHECK(dev <= 1e-8);
  }
}

TEST_CASE("abc and dq agree after the Park map") {
  const MachineParams p;
  const DqState x0{0.4, 1.1, 0.5, -0.3};
  const double theta0 = -x0.delta;
  const Vec3 i0 = inverse_park(theta0, {x0.i_d, x0.i_q});
  SimulationSpec abc;
  abc.variant = ModelVariant::Abc;
  abc.initial_state = {theta0, x0.omega, i0[0], i0[1], i0[2]};
  abc.mechanical_input = 0.6;
  abc.config.t_end = 2.0;
  abc.config.dt = 1e-4;
  const Trajectory ta = simulate(abc, p);
  const Trajectory td = simulate(dq_spec(x0, 0.6, 2.0, 1e-4), p);
  REQUIRE(ta.size() == td.size());
  double err = 0.0;
  for (std::size_t k = 0; k < ta.size(); ++k) {
    const DqState d = dq_view(ta, k, p);
    err = std::max(err, row_diff({d.delta, d.omega, d.i_d, d.i_q}, td.states[k]));
  }
  CHECK(err <= 1e-6);
}

TEST_CASE("shifted simulation is the dq simulation minus the equilibrium") {
  const MachineParams p;
  const Equilibrium eq = solve(p, 0.6).front().equilibrium;
  const ShiftedDqState xt0{0.2, -0.1, 0.05, 0.3};
  SimulationSpec sh;
  sh.variant = ModelVariant::Shifted;
  sh.initial_state = {xt0.delta_t, xt0.omega_t, xt0.id_t, xt0.iq_t};
  sh.equilibrium = eq;
  sh.config.t_end = 5.0;
  const Trajectory ts = simulate(sh, p);
  const Trajectory td = simulate(dq_spec(reconstruct(xt0, eq), eq.T_m, 5.0), p);
  REQUIRE(ts.size() == td.size());
  double err = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const DqState x{td.states[k][0], td.states[k][1], td.states[k][2], td.states[k][3]};
    const ShiftedDqState d = deviation(x, eq);
    err = std::max(err, row_diff({d.delta_t, d.omega_t, d.id_t, d.iq_t}, ts.states[k]));
  }
  CHECK(err <= 1e-8);

  SimulationSpec missing = sh;
  missing.equilibrium.reset();
  try {
    simulate(missing, p);
    FAIL("expected MissingEquilibrium");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingEquilibrium);
  }
}

TEST_CASE("swing right-hand sides") {
  const MachineParams p;
  const SwingParams imp = make_swing_params(ModelVariant::SwingImproved, 1.0, 0.6, p);
  CHECK(imp.P_max == p.b * 1.0 / p.L());
  CHECK(imp.D_tilde == p.D * p.omega_s);
  CHECK(imp.P_m == 0.6 * p.omega_s);
  CHECK(pmax_stator_only(1.0, p) == doctest::Approx(p.b / std::sqrt(1.5) / (p.omega_s * p.L_s)).epsilon(1e-15));

  const SwingState at_zero = swing_rhs({0.0, 1.3}, imp, p);
  CHECK(at_zero.omega == doctest::Approx((-p.D * 1.3 + 0.6) / p.J).epsilon(1e-15));
  CHECK(at_zero.delta == p.omega_s - 1.3);

  const SwingParams cls = make_swing_params(ModelVariant::SwingClassical, 1.0, 0.6, p);
  smdiss::testing::Rng rng(51);
  for (int k = 0; k < 50; ++k) {
    const double d = rng.uniform(-3, 3);
    const double lhs = p.J * p.omega_s * swing_rhs({d, p.omega_s}, cls, p).omega;
    const double rhs = p.omega_s * p.J * swing_rhs({d, p.omega_s}, imp, p).omega;
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }

  CHECK_THROWS_AS(swing_rhs({0.1, 0.0}, imp, p), SingularSpeedError);
  CHECK_NOTHROW(swing_rhs({0.1, 0.0}, cls, p));
  CHECK_THROWS_AS(make_swing_params(ModelVariant::Dq, 1.0, 0.6, p), Error);

  SimulationSpec stall;
  stall.variant = ModelVariant::SwingImproved;
  stall.initial_state = {0.0, 0.0};
  stall.config.t_end = 1.0;
  try {
    simulate(stall, p);
    FAIL("expected SingularSpeedError");
  } catch (const SingularSpeedError& e) {
    CHECK(e.last_valid_time() == 0.0);
  }
}

TEST_CASE("compare_reduction") {
  const MachineParams p;
  const Trajectory full = simulate(dq_spec({0.4, 1.0, 0.0, 0.0}, 0.6, 5.0), p);
  const ReductionMetrics same = compare_reduction(full, full, 1.0, 5.0);
  CHECK(same.rel_l2 == 0.0);
  CHECK(same.max_abs_delta == 0.0);
  CHECK(same.max_abs_omega == 0.0);
  CHECK(same.n_points > 0);

  SimulationSpec sw;
  sw.variant = ModelVariant::SwingImproved;
  sw.initial_state = {3.0, 1.5};
  sw.mechanical_input = 0.6;
  sw.config.t_end = 5.0;
  const Trajectory far = simulate(sw, p);
  const ReductionMetrics off = compare_reduction(full, far, 1.0, 5.0);
  CHECK(off.rel_l2 > 0.1);

  for (auto window : {std::pair{2.0, 1.0}, std::pair{1.0, 6.0}, std::pair{-1.0, 2.0}}) {
    try {
      compare_reduction(full, far, window.first, window.second);
      FAIL("expected WindowOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WindowOutOfRange);
    }
  }
}

TEST_CASE("lossless dq dynamics conserve storage") {
  MachineParams p;
  p.D = 0.0;
  p.I = 0.0;
  p.R_s = p.R_l = p.R_L = 0.0;
  SimulationSpec s = dq_spec({0.3, 1.5, 0.8, -0.6}, 0.0, 10.0);
  s.kinds = {SupplyKind::PassivityOriginal};
  const Trajectory t = simulate(s, p);
  const double v0 = t.storage.front();
  double dev = 0.0;
  for (double v : t.storage) dev = std::max(dev, std::abs(v - v0));
  CHECK(dev <= 1e-8 * v0);
}

TEST_CASE("trajectories pass verification for every supported kind") {
  const MachineParams p;
  const Equilibrium eq = solve(p, 0.6).front().equilibrium;
  SimulationSpec dq = dq_spec({0.4, 1.2, 0.3, -0.2}, 0.0, 5.0);
  SimulationSpec sh;
  sh.variant = ModelVariant::Shifted;
  sh.initial_state = {0.2, -0.1, 0.05, 0.3};
  sh.equilibrium = eq;
  sh.config.t_end = 5.0;
  SimulationSpec cl = sh;
  cl.variant = ModelVariant::ClosedLoop;
  cl.initial_state.push_back(0.4);
  cl.gains = DroopPI{0.5, 0.5};
  for (const SimulationSpec& spec : {dq, sh, cl}) {
    const Trajectory t = simulate(spec, p);
    for (SupplyKind k : supported_kinds(spec.variant)) {
      const DissipationReport r = verify_trajectory(t, k, std::nullopt, p);
      CHECK(r.verdict == Verdict::Dissipative);
    }
  }
  CHECK(supported_kinds(ModelVariant::SwingImproved).empty());
}
