#pragma once

#include <iosfwd>

namespace cascadegate {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitRuntime = 3,
};

/// Entry point for `cascadegate <replay|sweep|synth|serve> ...`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Asks a running `serve` command to shut down. Async-signal-safe.
void request_shutdown() noexcept;

}  // namespace cascadegate
