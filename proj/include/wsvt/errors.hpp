#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wsvt {

/// Failure categories. Each maps to one CLI exit code.
enum class ErrorKind {
  InvalidArgument,  ///< malformed parameters or shapes (exit 2)
  Io,               ///< unreadable or unwritable files (exit 3)
  Numerical,        ///< SVD non-convergence, divergence (exit 4)
  DegenerateInput,  ///< data the procedure is undefined on (exit 5)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::optional<int> iteration = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  /// Solver iteration at which a numerical failure happened, if any.
  std::optional<int> iteration() const noexcept { return iteration_; }

 private:
  ErrorKind kind_;
  std::optional<int> iteration_;
};

std::string_view to_string(ErrorKind kind);
int exit_code(ErrorKind kind);

[[noreturn]] void throw_invalid(const std::string& message);
[[noreturn]] void throw_io(const std::string& message);
[[noreturn]] void throw_degenerate(const std::string& message);

}  // namespace wsvt
