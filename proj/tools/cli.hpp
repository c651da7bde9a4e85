#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clifs::cli {

// Runs one invocation. args excludes the program name. Exit codes: 0
// success, 2 usage or configuration error, 3 data-format error (including
// leakage), 4 inference-runtime error, 1 anything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clifs::cli
