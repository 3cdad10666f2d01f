#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rtdbscan::cli {

/// Runs the command-line driver on `args` (program name excluded).
/// Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rtdbscan::cli
