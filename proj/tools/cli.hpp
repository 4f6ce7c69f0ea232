#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rsg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInvalid = 2, kNumeric = 3 };

/// Runs the `rsg` command line. `args` excludes the program name. Normal
/// output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rsg::cli
