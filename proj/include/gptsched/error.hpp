#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gptsched {

enum class ErrorKind {
  invalid_capacity,
  invalid_value,
  duplicate_allocation,
  not_allocated,
  unprofilable_request,
  undefined_metric,
  integrity,
  parse,
  validation,
  config,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_capacity: return "invalid-capacity";
    case ErrorKind::invalid_value: return "invalid-value";
    case ErrorKind::duplicate_allocation: return "duplicate-allocation";
    case ErrorKind::not_allocated: return "not-allocated";
    case ErrorKind::unprofilable_request: return "unprofilable-request";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gptsched
