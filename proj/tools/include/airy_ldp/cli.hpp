#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace airy_ldp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFlagged = 2;

// args[0] is the program name. Tables go to --out or `out`; the one-line
// summary goes to `out` when --out is given and to `err` otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace airy_ldp::cli
