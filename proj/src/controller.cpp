#include "smdiss/controller.hpp"

#include <cmath>

#include "smdiss/errors.hpp"
#include "smdiss/machine_model.hpp"
#include "smdiss/simulation.hpp"

namespace smdiss {

void DroopPI::validate() const {
  if (!(k_p >= 0.0) || !std::isfinite(k_p)) throw ValidationError("k_p >= 0");
  if (!(k_i >= 0.0) || !std::isfinite(k_i)) throw ValidationError("k_i >= 0");
}

double controller_output(double omega_t, const ControllerState& cs, const DroopPI& gains) noexcept {
  return gains.k_p * omega_t + gains.k_i * cs.z;
}

double controller_storage(const ControllerState& cs, const DroopPI& gains) noexcept {
  return 0.5 * gains.k_i * cs.z * cs.z;
}

ClosedLoopDerivative closed_loop_rhs(const ShiftedDqState& xt, const ControllerState& cs, const Equilibrium& eq,
                                     const DroopPI& gains, const MachineParams& p, double external_torque) noexcept {
  const double feedback = controller_output(xt.omega_t, cs, gains);
  return {shifted_rhs(xt, eq, p, external_torque - feedback), xt.omega_t};
}

DissipationReport verify_closed_loop(const Trajectory& traj, const Equilibrium& eq, const DroopPI& gains,
                                     const MachineParams& p, const Tolerances& tol) {
  if (traj.variant != ModelVariant::ClosedLoop) {
    throw Error(ErrorCode::KindMismatch, "verify_closed_loop needs a closed-loop trajectory");
  }
  Trajectory view = traj;
  view.gains = gains;
  view.equilibrium = eq;
  return verify_trajectory(view, SupplyKind::ClosedLoopShifted, eq, p, tol);
}

}  // namespace smdiss
