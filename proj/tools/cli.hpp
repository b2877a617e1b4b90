#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace eglom::cli {

/// Exit codes of the command-line tool.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kFailure = 2;

/// Runs one subcommand. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eglom::cli
