#pragma once

#include <array>
#include <optional>
#include <vector>

#include "smdiss/types.hpp"

namespace smdiss {

enum class BranchLabel { Principal, Complement };

struct EquilibriumBranch {
  BranchLabel label = BranchLabel::Principal;
  Equilibrium equilibrium;
};

/// Mismatch of the steady-state relations: speed match, torque balance,
/// d-axis balance, q-axis balance.
std::array<double, 4> residual(const Equilibrium& candidate, const MachineParams& p) noexcept;

/// Solves the steady-state relations for a given mechanical torque.
///
/// iq_s follows from the torque balance in closed form. The two circuit
/// equations are reduced to a quadratic in id_s through
/// sin^2 + cos^2 = 1, each real root yields delta_s by atan2, and every
/// branch is polished with damped Newton on (id_s, delta_s).
///
/// Branches come back sorted by delta_s ascending; the one with smaller
/// |delta_s| is labelled Principal. With a seed, Newton starts from the
/// seed instead and the single converged branch is returned.
///
/// Throws NoEquilibrium (no real root, or no source current) and
/// NonConvergence (residual above 1e-10 after 100 Newton iterations).
std::vector<EquilibriumBranch> solve(const MachineParams& p, double T_m,
                                     const std::optional<Equilibrium>& seed = std::nullopt);

/// Brute-force oracle: scans (delta_s, id_s) on a resolution x resolution
/// grid, keeps local minima of the circuit residual norm and refines each by
/// repeated window halving. Independent of the quadratic reduction used by
/// solve. Results are sorted by delta_s; empty when nothing is found.
std::vector<Equilibrium> grid_oracle(const MachineParams& p, double T_m, int resolution);

}  // namespace smdiss
