#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pats::cli {

/// Exit codes: 0 success, 1 configuration error, 2 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the CLI; `args` excludes the program name. Streams default to
/// std::cout / std::cerr / std::cin; tests inject their own.
int run(const std::vector<std::string>& args);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::istream& in);

} // namespace pats::cli
