#pragma once

#include <ostream>

namespace ctk {

inline constexpr int kExitOk = 0;
// Only with --fail-on-verdict: the analysis finished but was inconclusive.
inline constexpr int kExitVerdict = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitNumerical = 4;

// Runs `ctk check | simulate | krasovskii ...`. Reports go to --out or `out`;
// diagnostics and usage text go to `err`.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctk
