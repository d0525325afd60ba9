#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace collide_charge::cli {

enum ExitCode : int {
    kSuccess = 0,
    kIoError = 1,
    kValidation = 2,
    kTruncationOverflow = 3,
    kConvergenceFailure = 4,
    kReducibleChain = 5,
};

// Runs one CLI invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace collide_charge::cli
