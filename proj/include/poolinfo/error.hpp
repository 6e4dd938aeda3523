#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace poolinfo {

enum class ErrorCode {
  kInvalidArgument,
  kLengthMismatch,
  kZeroProbabilityOutcome,
  kCapExceeded,
  kBudgetExhausted,
  kEmptyHistory,
  kParse,
};

std::string_view to_string(ErrorCode code);

/// Domain error raised by every library operation. `field` names the
/// offending input when one can be singled out (used for field-level
/// validation messages in the HTTP service).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace poolinfo
