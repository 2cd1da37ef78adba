#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mech {

enum ExitCode : int {
    kExitOk = 0,
    kExitDiagnostics = 1,
    kExitRuntime = 2,
    kExitUsage = 3,
};

/// Runs the `mech` command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mech
