#include "vpagent/error.hpp"

namespace vpa {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedToolCall: return "MalformedToolCall";
    case ErrorCode::DuplicateAnswer: return "DuplicateAnswer";
    case ErrorCode::NoAnswerBlock: return "NoAnswerBlock";
    case ErrorCode::VideoUnreadable: return "VideoUnreadable";
    case ErrorCode::EmptyVideo: return "EmptyVideo";
    case ErrorCode::AssetNotFound: return "AssetNotFound";
    case ErrorCode::DecodeFailure: return "DecodeFailure";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::InvalidArguments: return "InvalidArguments";
    case ErrorCode::PolicyUnreachable: return "PolicyUnreachable";
    case ErrorCode::JudgeUnreachable: return "JudgeUnreachable";
    case ErrorCode::JudgeMalformedVerdict: return "JudgeMalformedVerdict";
    case ErrorCode::ClientUnreachable: return "ClientUnreachable";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::WeightSumViolation: return "WeightSumViolation";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::MaskShapeMismatch: return "MaskShapeMismatch";
    case ErrorCode::NoRenderableFrame: return "NoRenderableFrame";
    case ErrorCode::RewriteSchemaViolation: return "RewriteSchemaViolation";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::MultiplePlaceholders: return "MultiplePlaceholders";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

ParseError::ParseError(ErrorCode code, std::size_t offset, const std::string& detail)
    : Error(code, detail + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

bool is_environment_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::PolicyUnreachable:
    case ErrorCode::JudgeUnreachable:
    case ErrorCode::ClientUnreachable:
    case ErrorCode::VideoUnreadable:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

}  // namespace vpa
