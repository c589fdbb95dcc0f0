#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparseport::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kUncertified = 3;
inline constexpr int kData = 4;
inline constexpr int kInfeasible = 5;

/// Runs one command line (args[0] is the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "a,b,c" or "logspace:a:b:k" (k values of 10^t, t evenly spaced on [a, b]).
std::vector<double> parse_lambdas(const std::string& text);

}  // namespace sparseport::cli
