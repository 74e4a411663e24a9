#pragma once

// The qkd command-line interface. Exit codes: 0 success, 1 validation error,
// 2 runtime or data error.

#include <ostream>
#include <string>
#include <vector>

namespace qkd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Parses and runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace qkd::cli
