#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wirespec {

/// Exit codes: 0 success, 1 findings or failed checks, 2 usage or configuration errors.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Machine-readable output
/// goes to `out`, human diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace wirespec
