#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime failure (or a
// failed verify check), 2 bad configuration or usage.

#include <ostream>
#include <string>
#include <vector>

namespace wdro::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wdro::cli
