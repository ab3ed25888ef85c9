#pragma once

#include <array>
#include <utility>

#include "carbon/config.hpp"

// Command-line front end: solve / sweep / verify plus output plumbing.
// Exit codes: 0 success, 1 config or usage error, 2 solver numerical
// failure, 3 I/O failure, 4 verification check failure.

namespace carbon {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitVerify = 4;

// Fixed verification probe points (e, y) at t = 0, comparable across runs.
inline constexpr std::array<std::pair<double, double>, 5> kProbePoints = {{
    {0.0, 0.0},
    {1.0, -1.0},
    {1.0, 1.0},
    {-1.0, 0.0},
    {0.5, -2.0},
}};

int run_solve(const RunConfig& config, bool quiet);
int run_sweep(const RunConfig& config, bool quiet);
int run_verify(const RunConfig& config, bool quiet);

// Full argv dispatch; maps exceptions to exit codes.
int cli_main(int argc, const char* const* argv);

}  // namespace carbon
