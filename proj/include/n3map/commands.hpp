#pragma once

// Entry point of the n3map command-line tool: synth | map | mesh | eval |
// audit | ablate. Returns the process exit code (0 ok, 1 usage, 2 data
// error, 3 numerical failure).
namespace n3map {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

int run_cli(int argc, const char* const* argv);

}  // namespace n3map
