#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpagent/util.hpp"

namespace vpa {

enum class Role { system, user, assistant, tool };
enum class PartKind { text, image_ref, frame_sequence_ref };
enum class ToolFunction { view_visual_prompt, crop_video };
enum class TrajectoryStatus { answered, exhausted, error };

std::string_view to_string(Role r);
std::string_view to_string(PartKind k);
std::string_view to_string(ToolFunction f);
std::string_view to_string(TrajectoryStatus s);
Role parse_role(std::string_view s);
PartKind parse_part_kind(std::string_view s);
std::optional<ToolFunction> parse_tool_function(std::string_view s);
TrajectoryStatus parse_status(std::string_view s);

/// One piece of message content. For text parts `payload` is the text; for
/// image and frame-sequence parts it is an asset reference relative to the
/// run directory.
struct ContentPart {
  PartKind kind = PartKind::text;
  std::string payload;
  std::optional<double> timestamp;

  static ContentPart text(std::string s) { return {PartKind::text, std::move(s), std::nullopt}; }
  static ContentPart image(std::string ref, std::optional<double> ts = std::nullopt) {
    return {PartKind::image_ref, std::move(ref), ts};
  }
  static ContentPart frames(std::string ref) {
    return {PartKind::frame_sequence_ref, std::move(ref), std::nullopt};
  }
  friend bool operator==(const ContentPart&, const ContentPart&) = default;
};

struct Message {
  Role role = Role::user;
  std::vector<ContentPart> parts;

  /// Throws SchemaViolation when parts is empty.
  static Message make(Role role, std::vector<ContentPart> parts);
  static Message text(Role role, std::string s) { return make(role, {ContentPart::text(std::move(s))}); }

  /// Concatenation of all text parts.
  std::string text() const;
  friend bool operator==(const Message&, const Message&) = default;
};

struct ToolCall {
  ToolFunction function = ToolFunction::view_visual_prompt;
  Json arguments = Json::object();
  int round_index = 0;
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

/// Empty string when the arguments satisfy the function's parameter
/// schema, otherwise a description of the first violation.
std::string argument_schema_violation(ToolFunction f, const Json& args);

struct Timing {
  double generation_ms = 0;
  double tool_ms = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  int tool_calls_executed = 0;
  friend bool operator==(const Timing&, const Timing&) = default;
};

struct Trajectory {
  std::string sample_id;
  std::vector<Message> messages;
  std::vector<ToolCall> tool_history;
  std::optional<std::string> final_answer;
  TrajectoryStatus status = TrajectoryStatus::error;
  int rounds_used = 0;
  Timing timing;

  std::vector<const Message*> assistant_turns() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

Json to_json(const ContentPart& p);
Json to_json(const Message& m);
Json to_json(const ToolCall& c);
Json to_json(const Timing& t);
/// Trajectory record: exactly {sample_id, messages, tool_history,
/// final_answer, status, rounds_used, timing}.
Json to_json(const Trajectory& t);

ContentPart content_part_from_json(const Json& j);
Message message_from_json(const Json& j);
ToolCall tool_call_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);

}  // namespace vpa
