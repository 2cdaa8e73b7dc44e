#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gmr::cli {

/// Runs the `gmr` command line. Data goes to `out` (or files), diagnostics to `err`.
/// Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with arguments given without the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gmr::cli
