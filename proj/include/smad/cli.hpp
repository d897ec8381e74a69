#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smad::cli {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kIntegrity = 3, kNumeric = 4 };

/// Run one command line (args[0] is the program name). Messages go to `out` / `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Scalar entries of a JSON config object rendered as flags ("--key value"),
/// placed before the user's own flags so the latter win.
std::vector<std::string> config_to_flags(const std::string& json_text);

}  // namespace smad::cli
