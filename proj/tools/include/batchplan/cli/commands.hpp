#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace batchplan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInfeasible = 3;

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace batchplan::cli
