#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace freetraj::cli {

/// Runs one command line (without the program name). JSON results go to
/// `out`, diagnostics to `err`. Returns the process exit code: 0 on
/// success, 2 for invalid input, 1 for internal failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace freetraj::cli
