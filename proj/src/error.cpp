#include "p3s/error.hpp"

namespace p3s {

std::string_view category_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEmptyLog: return "empty-log";
    case ErrorCode::kEmptyResult: return "empty-result";
    case ErrorCode::kIndex: return "index";
    case ErrorCode::kInvalidSample: return "invalid-sample";
    case ErrorCode::kUnsupportedMethod: return "unsupported-method";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kUntrainable: return "untrainable";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kSplit: return "split";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kUndefinedAuc: return "undefined-auc";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kLength: return "length";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace p3s
