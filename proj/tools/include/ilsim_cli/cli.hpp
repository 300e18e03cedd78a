#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ilsim::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kInfeasible = 3 };

/// Runs one `ilsim` invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ilsim::cli
