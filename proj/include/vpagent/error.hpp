#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vpa {

enum class ErrorCode {
  // trajectory-core
  MalformedToolCall,
  DuplicateAnswer,
  NoAnswerBlock,
  // tool-env
  VideoUnreadable,
  EmptyVideo,
  AssetNotFound,
  DecodeFailure,
  InvalidWindow,
  UnknownTool,
  InvalidArguments,
  // remote services
  PolicyUnreachable,
  JudgeUnreachable,
  JudgeMalformedVerdict,
  ClientUnreachable,
  UnparseableVerdict,
  // reward-engine
  WeightSumViolation,
  EmptyMask,
  // pipeline / vp-render
  SchemaViolation,
  MaskShapeMismatch,
  NoRenderableFrame,
  RewriteSchemaViolation,
  MissingPlaceholder,
  MultiplePlaceholders,
  DimensionMismatch,
  // configuration / io
  ConfigError,
  ManifestInvalid,
  IoError,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Base error. `what()` is "<Name>: <detail>", which is also the text
/// surfaced in-band to the model for tool failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Parse errors additionally carry the byte offset of the offending tag.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, const std::string& detail);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// True for errors caused by the environment (unreachable endpoints, io),
/// as opposed to bad user input.
bool is_environment_error(ErrorCode code) noexcept;

}  // namespace vpa
