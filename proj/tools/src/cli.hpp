#pragma once

#include <iosfwd>

namespace collimcal::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_input = 2,
    exit_solver = 3,
    exit_degenerate = 4,
};

/// Parses argv and runs one subcommand. Diagnostics go to err, nothing is written to out
/// except help and version text.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace collimcal::cli
