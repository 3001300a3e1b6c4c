#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace popsyn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Runs one command line (args excludes the program name). Returns the
/// process exit code: 0 success, 1 usage or validation error, 2 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace popsyn
