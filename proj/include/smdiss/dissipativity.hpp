#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <variant>

#include "smdiss/types.hpp"

namespace smdiss {

struct Trajectory;

/// Each kind binds one storage function to one supply rate.
enum class SupplyKind {
  PassivityOriginal,   ///< ½Jω² + ½L|i|², supply y1ᵀu1
  NNIOriginal,         ///< same storage, supply V_d I_d + V_q I_q
  PassivityShifted,    ///< deviation storage, supply ỹ1ᵀũ1
  NNIShifted,          ///< deviation storage, supply ω̃·ũ2
  ClosedLoopShifted,   ///< deviation storage + ½k_i z̃², supply ỹ1ᵀũ1
};

inline constexpr std::array<SupplyKind, 5> kAllSupplyKinds = {
    SupplyKind::PassivityOriginal, SupplyKind::NNIOriginal, SupplyKind::PassivityShifted,
    SupplyKind::NNIShifted, SupplyKind::ClosedLoopShifted};

std::string_view to_string(SupplyKind kind) noexcept;
/// Inverse of to_string; throws ParseError on unknown names.
SupplyKind parse_supply_kind(std::string_view name);

bool is_shifted(SupplyKind kind) noexcept;

using PlantState = std::variant<DqState, ShiftedDqState>;

struct ControllerTerms {
  DroopPI gains;
  ControllerState state;
};

/// Everything besides the plant state that a storage/supply evaluation may
/// need. `input` is the mechanical torque T_m for original kinds and the
/// deviation T̃_m for shifted kinds; for the closed loop it is an external
/// torque added on top of the controller feedback.
struct SupplyContext {
  std::optional<Equilibrium> equilibrium;
  std::optional<ControllerTerms> controller;
  double input = 0.0;
};

struct DissipationSample {
  double t = 0.0;
  double storage = 0.0;
  double storage_rate = 0.0;
  double supply = 0.0;
  double slack = 0.0;

  bool operator==(const DissipationSample&) const = default;
};

struct ConditionVerdict {
  bool holds = false;
  bool strict = false;
  double margin = 0.0;          ///< 4 D R_sl / L² − |i^s|², A²
  double min_eigenvalue = 0.0;  ///< of quadratic_form_matrix

  bool operator==(const ConditionVerdict&) const = default;
};

enum class Verdict { Dissipative, ViolationFound, Inconclusive };
std::string_view to_string(Verdict v) noexcept;
Verdict parse_verdict(std::string_view name);

struct DissipationReport {
  SupplyKind kind = SupplyKind::PassivityOriginal;
  std::size_t n_samples = 0;
  double max_slack = 0.0;
  double integral_residual = 0.0;      ///< [V(T) − V(0)] − ∫ supply dt
  double quadrature_error = 0.0;       ///< Richardson estimate of the supply integral error
  Verdict verdict = Verdict::Inconclusive;
  DissipationSample worst_sample;

  bool operator==(const DissipationReport&) const = default;
};

struct Tolerances {
  double point_abs = 1e-9;
  double point_rel = 1e-9;
  double integral_rel = 1e-7;

  bool operator==(const Tolerances&) const = default;
};

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Throws MissingEquilibrium / MissingControllerState when the kind needs
/// context that is absent, KindMismatch when the state alternative does not
/// fit the kind.
double storage(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p);
double supply(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p);

/// Chain-rule storage derivative along the matching right-hand side.
double storage_rate(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p);

struct SlackTerms {
  double value = 0.0;
  double magnitude = 0.0;  ///< sum of absolute values of the individual terms
};

/// Completed-square form of storage_rate − supply for the kind.
SlackTerms slack_closed_form(SupplyKind kind, const PlantState& x, const SupplyContext& ctx,
                             const MachineParams& p);

/// storage_rate − supply, cross-checked against slack_closed_form. Throws
/// IdentityMismatch when the two disagree beyond 1e-9 of the term scale.
double dissipation_slack(SupplyKind kind, const PlantState& x, const SupplyContext& ctx, const MachineParams& p);

DissipationSample evaluate_sample(SupplyKind kind, double t, const PlantState& x, const SupplyContext& ctx,
                                  const MachineParams& p);

/// Matrix of the deviation dissipation quadratic form in (ĩ_d, ĩ_q, ω̃).
Mat3 quadratic_form_matrix(const Equilibrium& eq, const MachineParams& p) noexcept;

/// Eigenvalues of a symmetric 3×3 matrix in ascending order, closed form.
std::array<double, 3> symmetric_eigenvalues(const Mat3& m) noexcept;

/// Evaluates the parameter condition on an equilibrium and checks it agrees
/// in sign with the smallest eigenvalue of the quadratic form (throws
/// IdentityMismatch otherwise).
ConditionVerdict condition_check(const Equilibrium& eq, const MachineParams& p);

/// Pointwise and integral dissipation check along a trajectory. The
/// equilibrium defaults to the one stored in the trajectory.
DissipationReport verify_trajectory(const Trajectory& traj, SupplyKind kind, const std::optional<Equilibrium>& eq,
                                    const MachineParams& p, const Tolerances& tol = {});

}  // namespace smdiss
