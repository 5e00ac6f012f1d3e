#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cyclelife/error.hpp"

namespace cyclelife {

/// Exit status contract: 0 success, 1 data or convergence failure, 2 usage or config error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataFailure = 1;
inline constexpr int kExitUsage = 2;

int exit_code_for(ErrorKind kind);

/// Entry point behind the `cyclelife` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cyclelife
