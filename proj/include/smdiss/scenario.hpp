#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smdiss/dissipativity.hpp"
#include "smdiss/equilibrium.hpp"
#include "smdiss/simulation.hpp"
#include "smdiss/types.hpp"

namespace smdiss {

/// How the initial state of a run is chosen.
///  - OperatingPoint: the resolved equilibrium mapped into the variant's
///    coordinates (zero deviation for shifted variants), or synchronous
///    speed with zero currents when no equilibrium is configured.
///  - Explicit: `values` in the variant's native row layout.
///  - Random: OperatingPoint plus independent uniform offsets in
///    [-scale, scale] drawn from `seed`.
struct InitialStateSpec {
  enum class Mode { OperatingPoint, Explicit, Random };

  Mode mode = Mode::OperatingPoint;
  std::vector<double> values;
  std::uint64_t seed = 0;
  double scale = 0.1;

  bool operator==(const InitialStateSpec&) const = default;
};

using EquilibriumSpec = std::variant<BranchLabel, Equilibrium>;

struct ReductionSpec {
  ModelVariant swing_variant = ModelVariant::SwingImproved;
  double t0 = 0.0;
  std::optional<double> t1;  ///< defaults to t_end

  bool operator==(const ReductionSpec&) const = default;
};

/// One run description. JSON keys are the kebab-case field names; see
/// README.md for the schema and defaults.
struct Scenario {
  MachineParams params;
  ModelVariant variant = ModelVariant::Dq;
  double T_m = 0.0;               ///< absolute mechanical torque; equilibria are solved at it
  double torque_deviation = 0.0;  ///< T̃_m for shifted variants, external torque for the closed loop
  std::optional<EquilibriumSpec> equilibrium;
  InitialStateSpec initial_state;
  DroopPI gains;
  IntegratorConfig integrator;
  std::vector<SupplyKind> kinds;  ///< defaults to every kind the variant supports
  Tolerances tolerances;
  std::optional<double> swing_V;  ///< infinite-bus voltage, defaults to R_L * I
  ReductionSpec reduction;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  bool operator==(const Scenario&) const = default;
};

/// Parses and validates a scenario document. `source` names the document in
/// error messages.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::string& path);
/// Complete document with every field spelled out, so load(save(s)) == s.
std::string dump_scenario(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

/// Equilibrium selected by the scenario, solving at s.T_m for a branch label.
/// Empty when the scenario does not ask for one.
std::optional<Equilibrium> resolve_equilibrium(const Scenario& s);

/// Initial state in the variant's row layout. `seed` overrides the random
/// seed of a Random initial state.
std::vector<double> initial_state(const Scenario& s, const std::optional<Equilibrium>& eq,
                                  std::optional<std::uint64_t> seed = std::nullopt);

SimulationSpec make_simulation_spec(const Scenario& s, const std::optional<Equilibrium>& eq,
                                    std::optional<std::uint64_t> seed = std::nullopt);

double swing_voltage(const Scenario& s) noexcept;

enum class SweepAggregate { ConditionMargins, DissipationVerdicts };

struct SweepAxis {
  std::string path;  ///< e.g. "params.D", "t-m", "gains.k-p"
  std::vector<double> values;

  bool operator==(const SweepAxis&) const = default;
};

inline constexpr std::size_t kSweepGridCap = 1000000;

struct SweepSpec {
  Scenario base;
  std::vector<SweepAxis> axes;
  SweepAggregate aggregate = SweepAggregate::ConditionMargins;

  std::size_t grid_size() const noexcept;
  void validate() const;

  bool operator==(const SweepSpec&) const = default;
};

/// Scenario at the given grid point; index decomposes with the last axis
/// varying fastest.
Scenario sweep_point(const SweepSpec& sweep, std::size_t index);

/// Sets one numeric scenario field by its sweep path.
void set_field(Scenario& s, const std::string& path, double value);

/// A document with a "sweep" key is a sweep; anything else a plain scenario.
bool is_sweep_document(const std::string& text);
SweepSpec parse_sweep(const std::string& text, const std::string& source = "<sweep>");
std::string dump_sweep(const SweepSpec& sweep);

/// Reads a whole file; throws IoError.
std::string read_file(const std::string& path);
/// Writes a whole file; throws IoError.
void write_file(const std::string& path, const std::string& contents);

}  // namespace smdiss
