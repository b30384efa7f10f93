#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smdiss/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synchronous machine simulation and dissipativity certification"};
  smdiss::CliOptions opt;
  std::uint64_t seed = 0;
  std::string trace;

  app.add_option("command", opt.command, "simulate | equilibrium | check-condition | verify | reduce | sweep")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(smdiss::kCommands), std::end(smdiss::kCommands))));
  app.add_option("--scenario", opt.scenario_path, "scenario (or sweep) JSON file")->required();
  app.add_option("--out", opt.out_dir, "directory for artifacts");
  app.add_option("--kind", opt.kinds, "supply kind to verify, repeatable")->take_all();
  app.add_option("--threads", opt.threads, "sweep worker threads, 0 for all cores");
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized initial states");
  app.add_option("--trace", trace, "verify: recorded trace CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : smdiss::kExitError;
  }
  if (*seed_opt) opt.seed = seed;
  if (!trace.empty()) opt.trace_path = trace;
  return smdiss::run(opt, std::cout, std::cerr);
}
