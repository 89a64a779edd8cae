#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace p3s {

// Failure categories surfaced by every module. The CLI prints the category
// name verbatim, so the strings returned by category_name() are stable.
enum class ErrorCode {
  kParse,
  kEmptyLog,
  kEmptyResult,
  kIndex,
  kInvalidSample,
  kUnsupportedMethod,
  kNumerical,
  kConfig,
  kUntrainable,
  kDivergence,
  kSplit,
  kEvaluation,
  kUndefinedAuc,
  kContract,
  kFormat,
  kVersion,
  kLength,
  kIo,
};

std::string_view category_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace p3s
