#pragma once

#include <iosfwd>

namespace kpose {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitDegenerate = 3,
};

/// Entry point of the `kpose` tool. Subcommands: model, scenegen, estimate,
/// eval, bench, shapes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kpose
