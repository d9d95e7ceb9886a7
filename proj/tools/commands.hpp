#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace ccnmab::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kConfigError = 2 };

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "CCNMAB_OUT_DIR";

struct CommandOptions {
  std::filesystem::path out_dir = "out";
  // sweep-t0 overrides; empty means "use the config".
  std::vector<Slot> t0_list;
  std::vector<InitStrategy> strategies;
  // bounds override.
  std::vector<Slot> t0_grid;
  // simulate: number of per-replication traces to write.
  std::optional<int> traces;
  // Worker threads for replications; 0 picks the hardware concurrency.
  unsigned threads = 0;
};

/// simulate: curves.csv (+ regret.csv, trace_<seed>.csv on request).
int cmd_simulate(const ExperimentSpec& spec, const CommandOptions& opt, std::ostream& out);
/// sweep-t0: sweep.csv with one curve per (policy, t0, strategy).
int cmd_sweep_t0(const ExperimentSpec& spec, const CommandOptions& opt, std::ostream& out);
/// bounds: bounds.csv, transient.csv and, when requested, thm4.csv.
int cmd_bounds(const ExperimentSpec& spec, const CommandOptions& opt, std::ostream& out);
/// validate: dry-run report; exit 0 iff the config is valid.
int cmd_validate(const std::filesystem::path& config_path, std::ostream& out);

/// Full command line front end. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccnmab::cli
