#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deepar {

enum ExitCode : int { kExitSuccess = 0, kExitFailure = 1, kExitUsage = 2 };

// Entry point of the `deepar` tool; args[0] is the program name.
// Subcommands: train, predict, evaluate, stats.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deepar
