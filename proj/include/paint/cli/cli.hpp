#pragma once

#include <string>
#include <vector>

namespace paint::cli {

// Full command-line entry point: parses argv, dispatches to a subcommand,
// maps errors to exit codes (0 success, 2 usage, 3 data, 4 numeric).
int run(int argc, const char* const* argv);

// Convenience overload for in-process tests; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace paint::cli
