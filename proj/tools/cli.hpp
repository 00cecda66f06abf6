#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kpgp::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

/// Runs the command line `args` (program name excluded); output goes to --out or `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace kpgp::cli
