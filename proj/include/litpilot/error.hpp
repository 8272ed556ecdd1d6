#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace litpilot {

// Coarse classification used by the service layer to pick an HTTP status and
// by the CLI to pick an exit code.
enum class ErrorCategory {
  kInvalidInput,  // malformed or empty input
  kNotFound,      // unknown doc / session / chunk id
  kDomainRule,    // well-formed request that violates a domain limit
  kConflict,      // concurrent turn on one session
  kBackend,       // completion backend failed or rejected the request
  kTimeout,       // completion backend timed out
  kIo,            // filesystem / persistence failure
  kInternal,
};

// Every failure raised by the library is an Error carrying a stable kind name
// ("CountOutOfRange", "MissingSlot", ...) plus a human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, std::string detail,
        std::optional<long> limit = std::nullopt)
      : std::runtime_error(kind + ": " + detail),
        kind_(std::move(kind)),
        detail_(std::move(detail)),
        category_(category),
        limit_(limit) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  ErrorCategory category() const noexcept { return category_; }
  const std::optional<long>& limit() const noexcept { return limit_; }

 private:
  std::string kind_;
  std::string detail_;
  ErrorCategory category_;
  std::optional<long> limit_;
};

inline Error invalid_input(std::string kind, std::string detail) {
  return Error(std::move(kind), ErrorCategory::kInvalidInput, std::move(detail));
}

inline Error not_found(std::string kind, std::string detail) {
  return Error(std::move(kind), ErrorCategory::kNotFound, std::move(detail));
}

inline Error domain_rule(std::string kind, std::string detail,
                         std::optional<long> limit = std::nullopt) {
  return Error(std::move(kind), ErrorCategory::kDomainRule, std::move(detail), limit);
}

inline Error backend_error(std::string kind, std::string detail) {
  return Error(std::move(kind), ErrorCategory::kBackend, std::move(detail));
}

inline Error io_error(std::string detail) {
  return Error("IoError", ErrorCategory::kIo, std::move(detail));
}

}  // namespace litpilot
