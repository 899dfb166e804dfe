#pragma once

namespace martkit::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 1,
    kDataError = 2,
    kNumericalFailure = 3,
};

/// Parses argv, runs one subcommand and writes its artifacts. Failures print
/// a single JSON line {"error", "exit_code", "message"} on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace martkit::cli
