#pragma once

#include "smdiss/types.hpp"

namespace smdiss {

/// Power-invariant Park transform, d-row cosines and q-row sines.
Vec2 park(double rho, const Vec3& v_abc) noexcept;

/// Transpose of the Park matrix. The result is zero-sequence free and
/// park(rho, inverse_park(rho, v)) == v.
Vec3 inverse_park(double rho, const Vec2& v_dq) noexcept;

/// Stator back-EMF in the abc frame.
Vec3 back_emf_abc(double theta, double omega, const MachineParams& p) noexcept;

/// Three-phase source currents at time t (source angle omega_s * t).
Vec3 source_current_abc(double t, const MachineParams& p) noexcept;

/// abc-frame dynamics. The returned AbcState holds time derivatives.
/// Throws SingularSpeedError when |omega| <= kOmegaFloor.
AbcState abc_rhs(const AbcState& x, double t, double T_m, const MachineParams& p);

/// dq-frame dynamics with delta' = omega_s - omega. The returned DqState
/// holds time derivatives.
DqState dq_rhs(const DqState& x, double T_m, const MachineParams& p) noexcept;

PortSample port_outputs(const DqState& x, const MachineParams& p) noexcept;

enum class TorqueMode { DqIdeal, LoadBus };

/// DqIdeal: b*i_q. LoadBus: (V_d I_d + V_q I_q)/omega, singular at standstill.
double torque_e(const DqState& x, const MachineParams& p, TorqueMode mode);

/// Deviation dynamics about eq. T_m_t is the torque deviation T_m - eq.T_m.
ShiftedDqState shifted_rhs(const ShiftedDqState& xt, const Equilibrium& eq, const MachineParams& p,
                           double T_m_t = 0.0) noexcept;

/// Shifted ports. u2 is empty when |omega_t| <= kOmegaFloor.
PortSample shifted_ports(const ShiftedDqState& xt, const Equilibrium& eq, const MachineParams& p) noexcept;

/// sin(delta_s + delta_t) - sin(delta_s), evaluated without cancellation.
double sin_difference(double delta_s, double delta_t) noexcept;
/// cos(delta_s + delta_t) - cos(delta_s), evaluated without cancellation.
double cos_difference(double delta_s, double delta_t) noexcept;

}  // namespace smdiss
