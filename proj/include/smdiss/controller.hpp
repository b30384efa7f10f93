#pragma once

#include "smdiss/dissipativity.hpp"
#include "smdiss/types.hpp"

namespace smdiss {

struct Trajectory;

/// T̃_m = k_p ω̃ + k_i z̃.
double controller_output(double omega_t, const ControllerState& cs, const DroopPI& gains) noexcept;

/// V_c = ½ k_i z̃².
double controller_storage(const ControllerState& cs, const DroopPI& gains) noexcept;

struct ClosedLoopDerivative {
  ShiftedDqState plant;
  double z = 0.0;
};

/// Shifted plant under negative torque feedback: the plant sees
/// external_torque − T̃_m while the integrator accumulates ω̃.
ClosedLoopDerivative closed_loop_rhs(const ShiftedDqState& xt, const ControllerState& cs, const Equilibrium& eq,
                                     const DroopPI& gains, const MachineParams& p,
                                     double external_torque = 0.0) noexcept;

/// ClosedLoopShifted verification of a closed-loop trajectory, with the
/// equilibrium and gains given explicitly.
DissipationReport verify_closed_loop(const Trajectory& traj, const Equilibrium& eq, const DroopPI& gains,
                                     const MachineParams& p, const Tolerances& tol = {});

}  // namespace smdiss
