#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace brainid {

// Process exit codes of the command-line tool.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kIo = 2;
inline constexpr int kGeometry = 3;
inline constexpr int kChannels = 4;
inline constexpr int kSingular = 5;
inline constexpr int kUsage = 64;
} // namespace exit_code

// args excludes the program name. Data goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

} // namespace brainid
