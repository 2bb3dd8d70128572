#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace collusim::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kDiverged = 5 };

/// Entry point behind the `collusim` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace collusim::cli
