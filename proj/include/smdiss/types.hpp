#pragma once

#include <array>
#include <optional>

namespace smdiss {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

/// Divisions by a rotor speed or speed deviation are refused at or below this
/// magnitude (rad/s).
inline constexpr double kOmegaFloor = 1e-6;

#ifndef SMDISS_COUPLING_SIGN
#define SMDISS_COUPLING_SIGN -1
#endif

/// Sign of the L*omega*i_q term in the d-axis current equation; the q-axis
/// equation carries the opposite sign. -1 is what differentiating the Park
/// transform produces.
inline constexpr double kCouplingSign = SMDISS_COUPLING_SIGN;
static_assert(kCouplingSign == 1.0 || kCouplingSign == -1.0);

/// Machine, line, load and source constants. All in SI units.
struct MachineParams {
  double J = 1.0;        ///< rotor inertia, kg m^2
  double D = 0.5;        ///< damping, N m s/rad
  double b = 1.0;        ///< field-flux constant M_f i_f sqrt(3/2), V s/rad
  double L_s = 0.05;     ///< stator inductance, H
  double L_l = 0.05;     ///< line inductance, H
  double R_s = 0.05;     ///< stator resistance, Ohm
  double R_l = 0.05;     ///< line resistance, Ohm
  double R_L = 1.0;      ///< load resistance, Ohm
  double I = 1.0;        ///< dq source-current magnitude sqrt(3/2) I_s, A
  double omega_s = 1.0;  ///< source angular velocity, rad/s

  double L() const noexcept { return L_s + L_l; }
  double R() const noexcept { return R_s + R_l + R_L; }
  double R_sl() const noexcept { return R_s + R_l; }

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  bool operator==(const MachineParams&) const = default;
};

/// Rotor-aligned state. delta = theta_s - theta is kept unwrapped.
struct DqState {
  double delta = 0.0;
  double omega = 0.0;
  double i_d = 0.0;
  double i_q = 0.0;

  bool operator==(const DqState&) const = default;
};

struct AbcState {
  double theta = 0.0;
  double omega = 0.0;
  double i_a = 0.0;
  double i_b = 0.0;
  double i_c = 0.0;

  Vec3 currents() const noexcept { return {i_a, i_b, i_c}; }

  bool operator==(const AbcState&) const = default;
};

/// Deviation from an Equilibrium.
struct ShiftedDqState {
  double delta_t = 0.0;
  double omega_t = 0.0;
  double id_t = 0.0;
  double iq_t = 0.0;

  bool operator==(const ShiftedDqState&) const = default;
};

/// Steady state of the dq model together with the torque that sustains it.
struct Equilibrium {
  double delta_s = 0.0;
  double omega_s = 0.0;
  double id_s = 0.0;
  double iq_s = 0.0;
  double T_m = 0.0;

  DqState as_state() const noexcept { return {delta_s, omega_s, id_s, iq_s}; }

  bool operator==(const Equilibrium&) const = default;
};

inline DqState reconstruct(const ShiftedDqState& xt, const Equilibrium& eq) noexcept {
  return {xt.delta_t + eq.delta_s, xt.omega_t + eq.omega_s, xt.id_t + eq.id_s, xt.iq_t + eq.iq_s};
}

inline ShiftedDqState deviation(const DqState& x, const Equilibrium& eq) noexcept {
  return {x.delta - eq.delta_s, x.omega - eq.omega_s, x.i_d - eq.id_s, x.i_q - eq.iq_s};
}

/// Port quantities of either the original or the shifted system.
/// For the original system u1 = I_dq, y1 = V_dq, u2 = load-bus torque,
/// y2 = delta. For the shifted system the same slots hold the tilde
/// quantities. u2 is empty whenever its speed denominator is singular.
struct PortSample {
  Vec2 u1{};
  Vec2 y1{};
  Vec2 v_dq{};
  std::optional<double> u2;
  double y2 = 0.0;
};

/// Droop PI torque controller gains.
struct DroopPI {
  double k_p = 0.0;  ///< N m s/rad
  double k_i = 0.0;  ///< N m/rad

  void validate() const;

  bool operator==(const DroopPI&) const = default;
};

struct ControllerState {
  double z = 0.0;  ///< integrated speed deviation, rad

  bool operator==(const ControllerState&) const = default;
};

}  // namespace smdiss
