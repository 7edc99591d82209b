#pragma once

#include <ostream>
#include <string>

namespace prefalign::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kValidation = 2;
inline constexpr int kIo = 3;
inline constexpr int kProvider = 4;

// Entry point of the `prefalign` tool.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Fixtures file used when report.fixtures is unset.
std::string default_fixtures_path();

}  // namespace prefalign::cli
