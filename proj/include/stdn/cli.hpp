// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stdn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitDomain = 4;

/// Runs one `stdn` subcommand (gendata, train, eval, disentangle,
/// synthesize). args excludes the program name. Returns the process exit
/// code; messages go to out/err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stdn
