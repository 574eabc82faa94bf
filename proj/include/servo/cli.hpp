// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace servo {

using Getenv = std::function<const char*(const char*)>;

// Runs the `servo` command line (args exclude the program name) and
// returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Getenv& getenv);

// Every subcommand path, e.g. "plugin deploy".
std::vector<std::string> cli_command_paths();

}  // namespace servo
