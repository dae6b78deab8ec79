#include "wsvt/errors.hpp"

namespace wsvt {

Error::Error(ErrorKind kind, const std::string& message, std::optional<int> iteration)
    : std::runtime_error(message), kind_(kind), iteration_(iteration) {}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "usage";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::DegenerateInput: return "degenerate";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::Numerical: return 4;
    case ErrorKind::DegenerateInput: return 5;
  }
  return 1;
}

void throw_invalid(const std::string& message) { throw Error(ErrorKind::InvalidArgument, message); }
void throw_io(const std::string& message) { throw Error(ErrorKind::Io, message); }
void throw_degenerate(const std::string& message) { throw Error(ErrorKind::DegenerateInput, message); }

}  // namespace wsvt
