#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lorf {

inline constexpr const char* kVersion = "1.0.0";

/// Entry point of the `lorf` binary. `args` excludes the program name.
/// Returns 0 on success, 1 on a library error and 2 on a usage error.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace lorf
