#include "smdiss/machine_model.hpp"

#include <cmath>
#include <numbers>

#include "smdiss/errors.hpp"

namespace smdiss {

namespace {

constexpr double kTwoThirdsPi = 2.0 * std::numbers::pi / 3.0;
constexpr double kPhase[3] = {0.0, kTwoThirdsPi, 2.0 * kTwoThirdsPi};
const double kSqrtTwoThirds = std::sqrt(2.0 / 3.0);
const double kSqrtThreeHalves = std::sqrt(1.5);

void require_positive(double v, const char* invariant) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(invariant);
}

void require_nonnegative(double v, const char* invariant) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(invariant);
}

}  // namespace

void MachineParams::validate() const {
  require_positive(J, "J > 0");
  require_nonnegative(D, "D >= 0");
  require_positive(b, "b > 0");
  require_positive(L_s, "L_s > 0");
  require_positive(L_l, "L_l > 0");
  require_positive(R_s, "R_s > 0");
  require_positive(R_l, "R_l > 0");
  require_positive(R_L, "R_L > 0");
  require_nonnegative(I, "I >= 0");
  require_positive(omega_s, "omega_s > 0");
}

Vec2 park(double rho, const Vec3& v) noexcept {
  Vec2 out{0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    out[0] += std::cos(rho - kPhase[k]) * v[k];
    out[1] += std::sin(rho - kPhase[k]) * v[k];
  }
  out[0] *= kSqrtTwoThirds;
  out[1] *= kSqrtTwoThirds;
  return out;
}

Vec3 inverse_park(double rho, const Vec2& v) noexcept {
  Vec3 out{};
  for (int k = 0; k < 3; ++k) {
    out[k] = kSqrtTwoThirds * (std::cos(rho - kPhase[k]) * v[0] + std::sin(rho - kPhase[k]) * v[1]);
  }
  return out;
}

Vec3 back_emf_abc(double theta, double omega, const MachineParams& p) noexcept {
  const double m_f_i_f = p.b / kSqrtThreeHalves;
  Vec3 e{};
  for (int k = 0; k < 3; ++k) e[k] = m_f_i_f * omega * std::sin(theta - kPhase[k]);
  return e;
}

Vec3 source_current_abc(double t, const MachineParams& p) noexcept {
  const double amplitude = p.I / kSqrtThreeHalves;
  const double theta_s = p.omega_s * t;
  Vec3 out{};
  for (int k = 0; k < 3; ++k) out[k] = amplitude * std::sin(theta_s - kPhase[k]);
  return out;
}

AbcState abc_rhs(const AbcState& x, double t, double T_m, const MachineParams& p) {
  if (std::abs(x.omega) <= kOmegaFloor) throw SingularSpeedError(x.omega);
  const Vec3 e = back_emf_abc(x.theta, x.omega, p);
  const Vec3 src = source_current_abc(t, p);
  const Vec3 i = x.currents();
  const double electrical_power = e[0] * i[0] + e[1] * i[1] + e[2] * i[2];
  const double L = p.L();
  const double R = p.R();

  AbcState dx;
  dx.theta = x.omega;
  dx.omega = (-p.D * x.omega - electrical_power / x.omega + T_m) / p.J;
  dx.i_a = (-R * i[0] + e[0] - p.R_L * src[0]) / L;
  dx.i_b = (-R * i[1] + e[1] - p.R_L * src[1]) / L;
  dx.i_c = (-R * i[2] + e[2] - p.R_L * src[2]) / L;
  return dx;
}

DqState dq_rhs(const DqState& x, double T_m, const MachineParams& p) noexcept {
  const double L = p.L();
  const double R = p.R();
  const double source = p.R_L * p.I;
  DqState dx;
  dx.delta = p.omega_s - x.omega;
  dx.omega = (-p.D * x.omega - p.b * x.i_q + T_m) / p.J;
  dx.i_d = (-R * x.i_d + kCouplingSign * L * x.omega * x.i_q - source * std::sin(x.delta)) / L;
  dx.i_q = (-R * x.i_q - kCouplingSign * L * x.omega * x.i_d + p.b * x.omega - source * std::cos(x.delta)) / L;
  return dx;
}

PortSample port_outputs(const DqState& x, const MachineParams& p) noexcept {
  PortSample s;
  s.u1 = {p.I * std::sin(x.delta), p.I * std::cos(x.delta)};
  s.y1 = {p.R_L * (x.i_d + s.u1[0]), p.R_L * (x.i_q + s.u1[1])};
  s.v_dq = s.y1;
  if (std::abs(x.omega) > kOmegaFloor) {
    s.u2 = (s.v_dq[0] * s.u1[0] + s.v_dq[1] * s.u1[1]) / x.omega;
  }
  s.y2 = x.delta;
  return s;
}

double torque_e(const DqState& x, const MachineParams& p, TorqueMode mode) {
  if (mode == TorqueMode::DqIdeal) return p.b * x.i_q;
  if (std::abs(x.omega) <= kOmegaFloor) throw SingularSpeedError(x.omega);
  return *port_outputs(x, p).u2;
}

double sin_difference(double delta_s, double delta_t) noexcept {
  return 2.0 * std::cos(delta_s + 0.5 * delta_t) * std::sin(0.5 * delta_t);
}

double cos_difference(double delta_s, double delta_t) noexcept {
  return -2.0 * std::sin(delta_s + 0.5 * delta_t) * std::sin(0.5 * delta_t);
}

ShiftedDqState shifted_rhs(const ShiftedDqState& xt, const Equilibrium& eq, const MachineParams& p,
                           double T_m_t) noexcept {
  const double L = p.L();
  const double R = p.R();
  const double source = p.R_L * p.I;
  // omega*i_q - omega_s*iq_s expanded in deviations.
  const double coupling_d = xt.omega_t * xt.iq_t + xt.omega_t * eq.iq_s + eq.omega_s * xt.iq_t;
  const double coupling_q = xt.omega_t * xt.id_t + xt.omega_t * eq.id_s + eq.omega_s * xt.id_t;

  ShiftedDqState dx;
  dx.delta_t = -xt.omega_t;
  dx.omega_t = (-p.D * xt.omega_t - p.b * xt.iq_t + T_m_t) / p.J;
  dx.id_t = (-R * xt.id_t + kCouplingSign * L * coupling_d - source * sin_difference(eq.delta_s, xt.delta_t)) / L;
  dx.iq_t = (-R * xt.iq_t - kCouplingSign * L * coupling_q + p.b * xt.omega_t -
             source * cos_difference(eq.delta_s, xt.delta_t)) /
            L;
  return dx;
}

PortSample shifted_ports(const ShiftedDqState& xt, const Equilibrium& eq, const MachineParams& p) noexcept {
  PortSample s;
  s.u1 = {p.I * sin_difference(eq.delta_s, xt.delta_t), p.I * cos_difference(eq.delta_s, xt.delta_t)};
  s.y1 = {p.R_L * (s.u1[0] + xt.id_t), p.R_L * (s.u1[1] + xt.iq_t)};
  s.v_dq = s.y1;
  s.y2 = xt.delta_t;
  if (std::abs(xt.omega_t) > kOmegaFloor) {
    const double power = p.R_L * (s.u1[0] * (s.u1[0] - xt.id_t) + s.u1[1] * (s.u1[1] - xt.iq_t));
    s.u2 = power / xt.omega_t;
  }
  return s;
}

}  // namespace smdiss
