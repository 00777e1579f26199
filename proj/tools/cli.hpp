#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace symode::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitSymmetry = 3;

/// Runs the tool. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace symode::cli
