#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "smdiss/dissipativity.hpp"
#include "smdiss/errors.hpp"
#include "smdiss/types.hpp"

namespace smdiss {

enum class IntegratorMethod { FixedRk4, AdaptiveRk4 };

std::string_view to_string(IntegratorMethod m) noexcept;
IntegratorMethod parse_integrator_method(std::string_view name);

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::FixedRk4;
  double dt = 1e-4;     ///< fixed step, or initial step for the adaptive method
  double rtol = 1e-8;
  double atol = 1e-10;
  double t_end = 10.0;
  int sample_stride = 10;

  void validate() const;

  bool operator==(const IntegratorConfig&) const = default;
};

template <std::size_t N>
struct IntegrationResult {
  std::vector<double> times;
  std::vector<std::array<double, N>> states;
};

namespace detail {

template <std::size_t N>
std::array<double, N> axpy(const std::array<double, N>& x, double a, const std::array<double, N>& y) {
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = x[i] + a * y[i];
  return out;
}

template <std::size_t N, class Rhs>
std::array<double, N> rk4_step(Rhs& rhs, double t, const std::array<double, N>& x, double h) {
  const auto k1 = rhs(t, x);
  const auto k2 = rhs(t + 0.5 * h, axpy(x, 0.5 * h, k1));
  const auto k3 = rhs(t + 0.5 * h, axpy(x, 0.5 * h, k2));
  const auto k4 = rhs(t + h, axpy(x, h, k3));
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

template <std::size_t N>
double inf_norm(const std::array<double, N>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

/// Integrates x' = rhs(t, x) from t = 0 to config.t_end with classic RK4,
/// either at a fixed step or with step doubling. A sample is stored at t = 0,
/// after every sample_stride accepted steps and at t_end.
///
/// A SingularSpeedError raised by rhs is rethrown with the last time at
/// which the state was valid.
template <std::size_t N, class Rhs>
IntegrationResult<N> integrate(Rhs&& rhs, const std::array<double, N>& x0, const IntegratorConfig& config) {
  config.validate();
  IntegrationResult<N> out;
  out.times.push_back(0.0);
  out.states.push_back(x0);

  std::array<double, N> x = x0;
  double t = 0.0;
  long accepted = 0;
  try {
    if (config.method == IntegratorMethod::FixedRk4) {
      const long steps = static_cast<long>(std::ceil(config.t_end / config.dt * (1.0 - 1e-12)));
      for (long k = 0; k < steps; ++k) {
        const double t_next = (k + 1 == steps) ? config.t_end : static_cast<double>(k + 1) * config.dt;
        x = detail::rk4_step(rhs, t, x, t_next - t);
        t = t_next;
        ++accepted;
        if (accepted % config.sample_stride == 0 || k + 1 == steps) {
          out.times.push_back(t);
          out.states.push_back(x);
        }
      }
    } else {
      double h = config.dt;
      while (t < config.t_end) {
        const bool last = t + h >= config.t_end;
        const double step = last ? config.t_end - t : h;
        if (step < 1e-14 * std::max(1.0, std::abs(t))) {
          throw Error(ErrorCode::StepSizeUnderflow, "adaptive step fell below resolution at t = " + std::to_string(t));
        }
        const auto full = detail::rk4_step(rhs, t, x, step);
        const auto half = detail::rk4_step(rhs, t + 0.5 * step, detail::rk4_step(rhs, t, x, 0.5 * step), 0.5 * step);
        std::array<double, N> diff;
        for (std::size_t i = 0; i < N; ++i) diff[i] = full[i] - half[i];
        const double err = detail::inf_norm(diff) / (config.atol + config.rtol * detail::inf_norm(half));
        if (!std::isfinite(err)) {
          h = 0.25 * step;
          continue;
        }
        if (err <= 1.0) {
          x = half;
          t = last ? config.t_end : t + step;
          ++accepted;
          if (accepted % config.sample_stride == 0 || t >= config.t_end) {
            out.times.push_back(t);
            out.states.push_back(x);
          }
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h = step * factor;
      }
    }
  } catch (const SingularSpeedError& e) {
    throw SingularSpeedError(e.omega(), t);
  }
  return out;
}

enum class ModelVariant { Abc, Dq, Shifted, ClosedLoop, SwingImproved, SwingClassical };

std::string_view to_string(ModelVariant v) noexcept;
ModelVariant parse_model_variant(std::string_view name);
std::size_t state_dimension(ModelVariant v) noexcept;
/// Supply kinds whose storage and supply are defined on the variant's state.
std::vector<SupplyKind> supported_kinds(ModelVariant v);

struct SwingParams {
  ModelVariant variant = ModelVariant::SwingImproved;
  double V = 1.0;        ///< infinite-bus voltage magnitude, V
  double P_max = 0.0;    ///< synchronising power amplitude b V / L, W
  double D_tilde = 0.0;  ///< D omega_s
  double P_m = 0.0;      ///< T_m omega_s

  bool operator==(const SwingParams&) const = default;
};

/// Fills P_max, D_tilde and P_m from the machine constants.
SwingParams make_swing_params(ModelVariant variant, double V, double T_m, const MachineParams& p);

/// The textbook amplitude M_f i_f V / (omega_s L_s), which uses the stator
/// inductance alone. Reported next to P_max for comparison.
double pmax_stator_only(double V, const MachineParams& p) noexcept;

struct SwingState {
  double delta = 0.0;
  double omega = 0.0;
};

/// Reduced rotor dynamics on the quasi-steady current manifold. Improved:
/// J w' = -D w - s b V sin(delta)/(L w) + T_m with s the coupling sign.
/// Classical: the same with w frozen at omega_s in the electrical term and
/// multiplied through by omega_s. Throws SingularSpeedError for the improved
/// variant at standstill.
SwingState swing_rhs(const SwingState& x, const SwingParams& swing, const MachineParams& p);

/// Quasi-steady currents implied by the reduced algebraic relations.
Vec2 swing_currents(const SwingState& x, const SwingParams& swing, const MachineParams& p);

struct KindAnnotation {
  SupplyKind kind;
  std::vector<double> supply;
  std::vector<double> slack;
};

/// Time-indexed states of one model variant. Rows use the variant's native
/// layout: abc (theta, omega, i_a, i_b, i_c), dq (delta, omega, i_d, i_q),
/// shifted (delta_t, omega_t, id_t, iq_t), closed loop (shifted..., z),
/// swing (delta, omega).
struct Trajectory {
  ModelVariant variant = ModelVariant::Dq;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  double mechanical_input = 0.0;  ///< T_m, or T̃_m for the shifted variant
  std::optional<Equilibrium> equilibrium;
  std::optional<DroopPI> gains;
  std::optional<SwingParams> swing;

  std::vector<PortSample> ports;
  std::vector<double> storage;
  std::vector<KindAnnotation> annotations;

  std::size_t size() const noexcept { return times.size(); }
};

/// dq view of sample k: dq rows as is, abc rows through the Park transform,
/// shifted rows reconstructed about the equilibrium, swing rows with their
/// quasi-steady currents.
DqState dq_view(const Trajectory& traj, std::size_t k, const MachineParams& p);

/// Plant state and context for evaluating `kind` at sample k. Throws
/// KindMismatch when the kind is not supported by the variant.
std::pair<PlantState, SupplyContext> plant_point(const Trajectory& traj, std::size_t k, SupplyKind kind,
                                                 const std::optional<Equilibrium>& eq, const MachineParams& p);

struct SimulationSpec {
  ModelVariant variant = ModelVariant::Dq;
  std::vector<double> initial_state;
  double mechanical_input = 0.0;
  std::optional<Equilibrium> equilibrium;
  std::optional<DroopPI> gains;
  std::optional<SwingParams> swing;
  IntegratorConfig config;
  std::vector<SupplyKind> kinds;
};

/// Integrates the requested variant and annotates every sample with ports,
/// storage and the supply/slack of each requested kind.
Trajectory simulate(const SimulationSpec& spec, const MachineParams& p);

/// Recomputes ports, storage and per-kind supply/slack for every sample.
void annotate(Trajectory& traj, const std::vector<SupplyKind>& kinds, const MachineParams& p);

struct ReductionMetrics {
  double rel_l2 = 0.0;        ///< |(Δδ, Δω)|₂ / |(δ, ω)|₂ over the window
  double rel_l2_delta = 0.0;
  double rel_l2_omega = 0.0;
  double max_abs_delta = 0.0;
  double max_abs_omega = 0.0;
  std::size_t n_points = 0;
};

/// Compares (delta, omega) of a full dq trajectory against a reduced swing
/// trajectory on the full trajectory's samples inside [t0, t1]; the reduced
/// trajectory is linearly interpolated. Throws WindowOutOfRange when the
/// window is empty or not covered by both trajectories.
ReductionMetrics compare_reduction(const Trajectory& full, const Trajectory& reduced, double t0, double t1);

}  // namespace smdiss
