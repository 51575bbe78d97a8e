#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spiketempo {

// Exit codes of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // io / ingest / numeric failures
inline constexpr int kExitUsage = 2;    // unknown flag or subcommand
inline constexpr int kExitConfig = 3;   // invariant or configuration violation

// Entry point for the spiketempo tool. `args` excludes the program name.
// Failures print one line to `err`: error kind=<kind> message="<text>".
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spiketempo
