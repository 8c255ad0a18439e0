#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace protoverb::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericalError = 3;

int run(int argc, char** argv);

// In-process entry used by tests; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace protoverb::cli
