#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tworld {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Entry point of the `tworld` command; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads flat `key = value` lines ('#' comments) into flag arguments for every
/// key not already present among `args`; command-line flags win.
std::vector<std::string> merge_config_file(const std::vector<std::string>& args, const std::string& path);

}  // namespace tworld
