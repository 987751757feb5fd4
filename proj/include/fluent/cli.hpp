#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fluent::cli {

// Exit codes of the `fluent` tool.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;       // I/O, syntax or usage error
inline constexpr int kValidationError = 2;  // structural violations
inline constexpr int kRuntimeError = 3;     // fault while executing a model
inline constexpr int kCommuteFailure = 4;   // discrepancy above tolerance

/// Runs one command line (without the program name). Data goes to `out`,
/// diagnostics to `err`.
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fluent::cli
