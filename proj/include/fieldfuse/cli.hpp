#pragma once

#include <string>
#include <vector>

namespace fieldfuse {

enum ExitCode { kExitOk = 0, kExitUsage = 2, kExitNumerical = 3 };

// Entry point of the fieldfuse tool; returns the process exit code.
int run_cli(const std::vector<std::string>& args);

}  // namespace fieldfuse
