#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpagent/trajectory.hpp"

namespace vpa {

inline constexpr std::string_view kToolCallOpen = "<tool_call>";
inline constexpr std::string_view kToolCallClose = "</tool_call>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

struct ResponseBlocks {
  std::vector<ToolCall> tool_calls;
  std::optional<std::string> answer;
  /// Number of tool calls that textually precede the answer block.
  std::size_t answer_position = 0;
};

/// Splits one complete assistant turn into tool-call and answer blocks.
///
/// Each `<tool_call>` region must hold a single object
/// `{"name": <tool>, "arguments": {...}}` naming a member of the tool set
/// with schema-valid arguments. Nested or overlapping tags, an unclosed
/// `<tool_call>`, or unparseable contents raise MalformedToolCall (with the
/// byte offset of the offending tag); a second answer block raises
/// DuplicateAnswer. An `<answer>` without a closing tag is plain text.
/// Anything outside the blocks (including `<think>` sections) is ignored.
ResponseBlocks parse_response(std::string_view text, int round_index = 0);

/// Content of the first `<answer>...</answer>` block, whitespace-trimmed.
/// Throws NoAnswerBlock when no complete block exists.
std::string extract_answer(std::string_view text);

bool has_answer_block(std::string_view text);

}  // namespace vpa
