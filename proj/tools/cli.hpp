#ifndef TASC_TOOLS_CLI_HPP
#define TASC_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace tasc::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2 };

/// Runs the tool with argv-style arguments (args[0] is the program name).
/// Diagnostics go to `err`; `out` receives summaries and --help text.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tasc::cli

#endif  // TASC_TOOLS_CLI_HPP
