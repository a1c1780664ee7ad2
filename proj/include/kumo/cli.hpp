// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kumo
{

inline constexpr int ExitOk = 0;
inline constexpr int ExitUsage = 1;
inline constexpr int ExitFailure = 2;

/// Runs one subcommand. args excludes the program name. Output without --out
/// goes to `out`; diagnostics go to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

} // namespace kumo
