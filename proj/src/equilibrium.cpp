#include "smdiss/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smdiss/errors.hpp"

namespace smdiss {

namespace {

constexpr double kResidualTolerance = 1e-10;
constexpr int kMaxNewtonIterations = 100;
constexpr int kMaxStepHalvings = 30;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

double torque_balanced_iq(const MachineParams& p, double T_m) { return (T_m - p.D * p.omega_s) / p.b; }

struct CircuitResidual {
  double d;
  double q;
};

CircuitResidual circuit(const MachineParams& p, double iq, double id, double delta) {
  const double L = p.L();
  const double R = p.R();
  const double w = p.omega_s;
  const double source = p.R_L * p.I;
  return {-R * id + kCouplingSign * L * w * iq - source * std::sin(delta),
          -R * iq - kCouplingSign * L * w * id + p.b * w - source * std::cos(delta)};
}

double max_abs(const std::array<double, 4>& r) {
  double m = 0.0;
  for (double v : r) m = std::max(m, std::abs(v));
  return m;
}

Equilibrium polish(const MachineParams& p, double T_m, double iq, double id, double delta) {
  const double L = p.L();
  const double R = p.R();
  const double source = p.R_L * p.I;
  const double coupling = kCouplingSign * L * p.omega_s;

  Equilibrium eq{delta, p.omega_s, id, iq, T_m};
  double norm = max_abs(residual(eq, p));
  for (int it = 0; it < kMaxNewtonIterations && norm > 0.0; ++it) {
    const CircuitResidual f = circuit(p, iq, eq.id_s, eq.delta_s);
    // d/d(id), d/d(delta) of both circuit rows.
    const double a11 = -R;
    const double a12 = -source * std::cos(eq.delta_s);
    const double a21 = -coupling;
    const double a22 = source * std::sin(eq.delta_s);
    const double det = a11 * a22 - a12 * a21;
    if (det == 0.0 || !std::isfinite(det)) break;
    const double step_id = (f.d * a22 - a12 * f.q) / det;
    const double step_delta = (a11 * f.q - a21 * f.d) / det;

    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= kMaxStepHalvings; ++h, scale *= 0.5) {
      Equilibrium trial = eq;
      trial.id_s -= scale * step_id;
      trial.delta_s -= scale * step_delta;
      const double trial_norm = max_abs(residual(trial, p));
      if (trial_norm < norm) {
        eq = trial;
        norm = trial_norm;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (!(norm <= kResidualTolerance)) {
    throw Error(ErrorCode::NonConvergence,
                "equilibrium Newton polish stalled with residual " + std::to_string(norm));
  }
  eq.delta_s = wrap_angle(eq.delta_s);
  return eq;
}

std::vector<EquilibriumBranch> label_and_sort(std::vector<Equilibrium> eqs) {
  std::sort(eqs.begin(), eqs.end(), [](const auto& a, const auto& b) { return a.delta_s < b.delta_s; });
  std::vector<EquilibriumBranch> out;
  std::size_t principal = 0;
  for (std::size_t k = 1; k < eqs.size(); ++k) {
    if (std::abs(eqs[k].delta_s) < std::abs(eqs[principal].delta_s)) principal = k;
  }
  for (std::size_t k = 0; k < eqs.size(); ++k) {
    out.push_back({k == principal ? BranchLabel::Principal : BranchLabel::Complement, eqs[k]});
  }
  return out;
}

}  // namespace

std::array<double, 4> residual(const Equilibrium& c, const MachineParams& p) noexcept {
  const CircuitResidual f = circuit(p, c.iq_s, c.id_s, c.delta_s);
  return {c.omega_s - p.omega_s, -p.D * c.omega_s - p.b * c.iq_s + c.T_m, f.d, f.q};
}

std::vector<EquilibriumBranch> solve(const MachineParams& p, double T_m, const std::optional<Equilibrium>& seed) {
  p.validate();
  if (p.I == 0.0) {
    throw Error(ErrorCode::NoEquilibrium, "no source current: rotor angle is not determined");
  }
  const double iq = torque_balanced_iq(p, T_m);

  if (seed) {
    return label_and_sort({polish(p, T_m, iq, seed->id_s, seed->delta_s)});
  }

  // source*sin(delta) = alpha*id + beta, source*cos(delta) = gamma*id + eps.
  const double L = p.L();
  const double R = p.R();
  const double w = p.omega_s;
  const double source = p.R_L * p.I;
  const double alpha = -R;
  const double beta = kCouplingSign * L * w * iq;
  const double gamma = -kCouplingSign * L * w;
  const double eps = p.b * w - R * iq;

  const double qa = alpha * alpha + gamma * gamma;
  const double qb = 2.0 * (alpha * beta + gamma * eps);
  const double qc = beta * beta + eps * eps - source * source;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (!(disc >= 0.0)) {
    throw Error(ErrorCode::NoEquilibrium,
                "source magnitude R_L*I is too small to close the circuit equations");
  }

  std::vector<double> roots;
  const double sq = std::sqrt(disc);
  const double qq = -0.5 * (qb + std::copysign(sq, qb));
  if (qq != 0.0) {
    roots.push_back(qq / qa);
    if (disc > 0.0) roots.push_back(qc / qq);
  } else {
    roots.push_back(0.0);
  }

  std::vector<Equilibrium> eqs;
  for (double id : roots) {
    const double delta = std::atan2(alpha * id + beta, gamma * id + eps);
    const Equilibrium e = polish(p, T_m, iq, id, delta);
    const bool duplicate = std::any_of(eqs.begin(), eqs.end(), [&](const Equilibrium& o) {
      return std::abs(o.delta_s - e.delta_s) < 1e-12 && std::abs(o.id_s - e.id_s) < 1e-12;
    });
    if (!duplicate) eqs.push_back(e);
  }
  return label_and_sort(std::move(eqs));
}

std::vector<Equilibrium> grid_oracle(const MachineParams& p, double T_m, int resolution) {
  if (resolution < 100) throw ValidationError("resolution >= 100");
  const double iq = torque_balanced_iq(p, T_m);
  const double L = p.L();
  const double R = p.R();
  const double w = p.omega_s;
  const double source = p.R_L * p.I;
  const int n = resolution;

  // The d-axis row bounds |id| by (L w |iq| + R_L I)/R.
  const double i_max = 1.1 * (L * w * std::abs(iq) + source) / R + 1e-9;
  const double h_delta = 2.0 * std::numbers::pi / n;
  const double h_id = 2.0 * i_max / n;
  auto delta_at = [&](int j) { return -std::numbers::pi + (j + 0.5) * h_delta; };
  auto id_at = [&](int k) { return -i_max + (k + 0.5) * h_id; };

  std::vector<double> norm(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const CircuitResidual f = circuit(p, iq, id_at(k), delta_at(j));
      norm[static_cast<std::size_t>(j) * n + k] = std::hypot(f.d, f.q);
    }
  }
  auto at = [&](int j, int k) { return norm[static_cast<std::size_t>((j + n) % n) * n + k]; };

  const double lipschitz_id = std::hypot(R, L * w);
  const double threshold = 2.0 * (source * h_delta + lipschitz_id * h_id);

  // Eliminating id through the d-axis row leaves a scalar function of delta.
  auto id_of = [&](double delta) { return (kCouplingSign * L * w * iq - source * std::sin(delta)) / R; };
  auto g = [&](double delta) { return circuit(p, iq, id_of(delta), delta).q; };
  const double scale = 1.0 + std::abs(p.b * w) + source + R * std::abs(iq);

  std::vector<Equilibrium> found;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double v = at(j, k);
      if (!(v < threshold)) continue;
      bool is_min = true;
      for (int dj = -1; dj <= 1 && is_min; ++dj) {
        for (int dk = -1; dk <= 1; ++dk) {
          if ((dj == 0 && dk == 0) || k + dk < 0 || k + dk >= n) continue;
          if (at(j + dj, k + dk) < v) {
            is_min = false;
            break;
          }
        }
      }
      if (!is_min) continue;

      double lo = delta_at(j) - 2.0 * h_delta;
      double hi = delta_at(j) + 2.0 * h_delta;
      double g_lo = g(lo);
      double root;
      if (std::signbit(g_lo) != std::signbit(g(hi))) {
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          const double g_mid = g(mid);
          if (std::signbit(g_mid) == std::signbit(g_lo)) {
            lo = mid;
            g_lo = g_mid;
          } else {
            hi = mid;
          }
        }
        root = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
      } else {
        // Tangential root: golden-section minimisation of |g|.
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, bnd = hi;
        for (int it = 0; it < 200; ++it) {
          const double c1 = bnd - phi * (bnd - a);
          const double c2 = a + phi * (bnd - a);
          if (std::abs(g(c1)) < std::abs(g(c2))) bnd = c2; else a = c1;
        }
        root = 0.5 * (a + bnd);
      }

      const double id = id_of(root);
      const CircuitResidual f = circuit(p, iq, id, root);
      if (std::hypot(f.d, f.q) > 1e-9 * scale) continue;
      const double delta = wrap_angle(root);
      const bool duplicate = std::any_of(found.begin(), found.end(), [&](const Equilibrium& o) {
        return std::abs(wrap_angle(o.delta_s - delta)) < 1e-7;
      });
      if (!duplicate) found.push_back({delta, w, id, iq, T_m});
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.delta_s < b.delta_s; });
  return found;
}

}  // namespace smdiss
