#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include "smdiss/types.hpp"

namespace smdiss::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1p-53;
    return lo + (hi - lo) * u;
  }

  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline MachineParams p0() { return MachineParams{}; }

inline MachineParams random_params(Rng& rng) {
  MachineParams p;
  p.J = rng.log_uniform(0.1, 10.0);
  p.D = rng.log_uniform(0.05, 5.0);
  p.b = rng.log_uniform(0.2, 5.0);
  p.L_s = rng.log_uniform(0.02, 0.5);
  p.L_l = rng.log_uniform(0.02, 0.5);
  p.R_s = rng.log_uniform(0.01, 0.5);
  p.R_l = rng.log_uniform(0.01, 0.5);
  p.R_L = rng.log_uniform(0.1, 5.0);
  p.I = rng.uniform(0.0, 3.0);
  p.omega_s = rng.log_uniform(0.5, 5.0);
  return p;
}

inline DqState random_dq_state(Rng& rng, double omega_max = 10.0, double current_max = 10.0) {
  const double r = current_max * std::sqrt(rng.uniform(0.0, 1.0));
  const double a = rng.uniform(-M_PI, M_PI);
  return {rng.uniform(-M_PI, M_PI), rng.uniform(-omega_max, omega_max), r * std::cos(a), r * std::sin(a)};
}

inline ShiftedDqState random_shifted_state(Rng& rng, double radius) {
  std::array<double, 4> v{};
  double n = 0.0;
  for (double& c : v) {
    c = rng.uniform(-1.0, 1.0);
    n += c * c;
  }
  const double s = radius * rng.uniform(0.0, 1.0) / std::sqrt(n);
  return {v[0] * s, v[1] * s, v[2] * s, v[3] * s};
}

inline double max_abs_diff(const DqState& a, const DqState& b) {
  return std::max({std::abs(a.delta - b.delta), std::abs(a.omega - b.omega), std::abs(a.i_d - b.i_d),
                   std::abs(a.i_q - b.i_q)});
}

}  // namespace smdiss::testing
