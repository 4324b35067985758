#pragma once

#include <string>
#include <vector>

namespace noiseforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitValidation = 4;

/// Parses argv (argv[0] is the program name) and runs one subcommand.
/// Returns the process exit code; never throws.
int run(const std::vector<std::string>& argv);

}  // namespace noiseforge::cli
