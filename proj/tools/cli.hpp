#pragma once

#include <iosfwd>

namespace lljump::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageOrIo = 1;
inline constexpr int kSolverFailed = 2;
inline constexpr int kBlowup = 3;

/// Runs one command line. Diagnostics go to `err`, results to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lljump::cli
