#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace waytrain {

/// Failure categories surfaced by every module. HTTP and CLI front ends map
/// these onto status codes and exit codes.
enum class ErrorCode {
  ContractViolation,
  InsufficientData,
  Ordering,
  State,
  PhotoRequired,
  NotFound,
  Validation,
  Precondition,
  IncompleteNegotiation,
  NoDecisionPoints,
  Classification,
  Integrity,
  SyncPolicy,
  Transparency,
  ConsentRequired,
  ModalityConstraint,
  Role,
  Input,
  Profile,
  Conflict,
  FeedUnavailable,
  Range,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace waytrain
