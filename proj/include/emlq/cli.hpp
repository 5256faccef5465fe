#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace emlq {

// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSolver = 3,
  kExitVerify = 4,
};

// args[0] is the program name. Subcommands: riccati, gamma, simulate, verify,
// export-figures. Every subcommand writes run_info.csv into --out.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emlq
