#pragma once

namespace fdelab::cli {

/// Exit codes: 0 success, 1 solver failure, 2 usage or configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSolver = 1;
inline constexpr int kExitConfig = 2;

int run_cli(int argc, const char* const* argv);

}  // namespace fdelab::cli
