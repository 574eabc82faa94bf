// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>

#include "servo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return servo::run_cli(args, std::cout, std::cerr, [](const char* name) { return std::getenv(name); });
}
