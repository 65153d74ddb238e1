// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iostream>

namespace mx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of mxtool. Reports go to `out`, diagnostics to `err` as
/// "error: <code>: <message>".
int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace mx::cli
