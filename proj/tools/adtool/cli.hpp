#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adtool {

/// Entry point of the `adtool` command line. Writes results to `out` and
/// returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with argv[0] supplied.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adtool
