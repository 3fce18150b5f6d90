#pragma once

namespace tsctm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point for the `tsctm` tool. Returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace tsctm::cli
