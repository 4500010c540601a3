#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tweezer::cli {

/// Exit codes of every subcommand.
enum ExitCode : int {
  kOk = 0,
  kQualityMissed = 1,
  kInvalidInput = 2,
  kInfeasible = 3,
};

/// Runs the command line (args excludes the program name). Normal output
/// goes to `out`; failures are reported on `err` as one JSON line
/// {"error": code, "detail": text}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tweezer::cli
