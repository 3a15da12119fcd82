#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flowpilot/error.hpp"

namespace flowpilot::cli {

/// Exit codes by error family; 0 is success.
int exit_code(ErrorFamily family);

/// Runs one command line (args excludes the program name). Output goes to
/// `out`, diagnostics and planner questions to `err`, interactive answers
/// come from `in`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace flowpilot::cli
