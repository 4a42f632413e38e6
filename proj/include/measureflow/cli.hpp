#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mflow::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    ok = 0,
    check_failed = 1,   // a validation check or invariant failed
    config_error = 2,   // bad arguments, schema violations, mass/dimension mismatch
    overflow = 3,       // the support left the lattice extent
    io_error = 4,       // an input could not be read or an output written
    solver_error = 5,   // internal solver failure
};

/// Entry point of the `measureflow` tool. `args` excludes the program name.
/// JSON results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mflow::cli
