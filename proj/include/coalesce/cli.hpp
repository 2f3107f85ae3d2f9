#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coalesce::cli {

/// Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2 };

/// Entry point of the `coalesce` tool; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coalesce::cli
