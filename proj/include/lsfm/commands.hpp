#pragma once

#include "lsfm/config.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace lsfm {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

void cmd_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_fit(const RunConfig& cfg, std::ostream& log);
void cmd_diagnose(const RunConfig& cfg, std::ostream& log);
void cmd_sim_study(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point: parses arguments, dispatches, and maps
/// exceptions to exit codes with a message on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsfm
