#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace smdiss {

inline constexpr const char* kCommands[] = {"simulate", "equilibrium", "check-condition", "verify", "reduce", "sweep"};

struct CliOptions {
  std::string command;
  std::string scenario_path;
  std::optional<std::string> out_dir;
  std::vector<std::string> kinds;  ///< overrides the scenario's kinds when non-empty
  unsigned threads = 1;            ///< 0 picks the hardware concurrency
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace_path;  ///< verify a recorded trace instead of simulating
};

enum ExitStatus : int { kExitOk = 0, kExitError = 1, kExitNotDissipative = 2 };

/// Executes one subcommand. The JSON result goes to `out` and, with
/// --out, into the output directory together with any trace or table. On
/// failure a JSON error object goes to `err` and 1 is returned.
int run(const CliOptions& options, std::ostream& out, std::ostream& err);

/// {"error": {"code": ..., "message": ..., ...}} for a caught exception.
std::string error_json(const std::exception& e);

/// Sets the log level from SMDISS_LOG (error, info, debug); logs go to stderr.
void configure_logging();

}  // namespace smdiss
