#pragma once

#include <ostream>

namespace amc::cli {

// Process exit codes; stable for scripting.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kTraining = 4,
    kGeometry = 5,
};

/// Entry point of the `amc` tool: generate, split, train, eval, classify,
/// inspect, rc-taps.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace amc::cli
