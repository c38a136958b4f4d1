#include "vpagent/trajectory.hpp"

#include "vpagent/error.hpp"

namespace vpa {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

std::string_view to_string(PartKind k) {
  switch (k) {
    case PartKind::text: return "text";
    case PartKind::image_ref: return "image_ref";
    case PartKind::frame_sequence_ref: return "frame_sequence_ref";
  }
  return "text";
}

std::string_view to_string(ToolFunction f) {
  return f == ToolFunction::view_visual_prompt ? "view_visual_prompt" : "crop_video";
}

std::string_view to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::answered: return "answered";
    case TrajectoryStatus::exhausted: return "exhausted";
    case TrajectoryStatus::error: return "error";
  }
  return "error";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  if (s == "tool") return Role::tool;
  throw Error(ErrorCode::SchemaViolation, "unknown role '" + std::string(s) + "'");
}

PartKind parse_part_kind(std::string_view s) {
  if (s == "text") return PartKind::text;
  if (s == "image_ref") return PartKind::image_ref;
  if (s == "frame_sequence_ref") return PartKind::frame_sequence_ref;
  throw Error(ErrorCode::SchemaViolation, "unknown part kind '" + std::string(s) + "'");
}

std::optional<ToolFunction> parse_tool_function(std::string_view s) {
  if (s == "view_visual_prompt") return ToolFunction::view_visual_prompt;
  if (s == "crop_video") return ToolFunction::crop_video;
  return std::nullopt;
}

TrajectoryStatus parse_status(std::string_view s) {
  if (s == "answered") return TrajectoryStatus::answered;
  if (s == "exhausted") return TrajectoryStatus::exhausted;
  if (s == "error") return TrajectoryStatus::error;
  throw Error(ErrorCode::SchemaViolation, "unknown status '" + std::string(s) + "'");
}

Message Message::make(Role role, std::vector<ContentPart> parts) {
  if (parts.empty()) throw Error(ErrorCode::SchemaViolation, "message without parts");
  return Message{role, std::move(parts)};
}

std::string Message::text() const {
  std::string out;
  for (const auto& p : parts) {
    if (p.kind == PartKind::text) out += p.payload;
  }
  return out;
}

std::string argument_schema_violation(ToolFunction f, const Json& args) {
  if (!args.is_object()) return "arguments must be an object";
  switch (f) {
    case ToolFunction::view_visual_prompt: {
      if (!args.contains("path") || !args["path"].is_string()) return "'path' (string) is required";
      for (const auto& [key, _] : args.items()) {
        if (key != "path") return "unexpected argument '" + key + "'";
      }
      return {};
    }
    case ToolFunction::crop_video: {
      for (const char* key : {"start", "end"}) {
        if (!args.contains(key) || !args[key].is_number()) {
          return std::string("'") + key + "' (number) is required";
        }
      }
      if (args.contains("video_path") && !args["video_path"].is_string()) {
        return "'video_path' must be a string";
      }
      for (const auto& [key, _] : args.items()) {
        if (key != "start" && key != "end" && key != "video_path") {
          return "unexpected argument '" + key + "'";
        }
      }
      return {};
    }
  }
  return "unknown function";
}

std::vector<const Message*> Trajectory::assistant_turns() const {
  std::vector<const Message*> out;
  for (const auto& m : messages) {
    if (m.role == Role::assistant) out.push_back(&m);
  }
  return out;
}

Json to_json(const ContentPart& p) {
  Json j = {{"kind", to_string(p.kind)}, {"payload", p.payload}};
  if (p.timestamp) j["timestamp"] = *p.timestamp;
  return j;
}

Json to_json(const Message& m) {
  Json parts = Json::array();
  for (const auto& p : m.parts) parts.push_back(to_json(p));
  return {{"role", to_string(m.role)}, {"parts", std::move(parts)}};
}

Json to_json(const ToolCall& c) {
  return {{"function", to_string(c.function)}, {"arguments", c.arguments}, {"round_index", c.round_index}};
}

Json to_json(const Timing& t) {
  return {{"generation_ms", t.generation_ms},
          {"tool_ms", t.tool_ms},
          {"prompt_tokens", t.prompt_tokens},
          {"completion_tokens", t.completion_tokens},
          {"tool_calls_executed", t.tool_calls_executed}};
}

Json to_json(const Trajectory& t) {
  Json messages = Json::array();
  for (const auto& m : t.messages) messages.push_back(to_json(m));
  Json history = Json::array();
  for (const auto& c : t.tool_history) history.push_back(to_json(c));
  return {{"sample_id", t.sample_id},
          {"messages", std::move(messages)},
          {"tool_history", std::move(history)},
          {"final_answer", t.final_answer ? Json(*t.final_answer) : Json(nullptr)},
          {"status", to_string(t.status)},
          {"rounds_used", t.rounds_used},
          {"timing", to_json(t.timing)}};
}

ContentPart content_part_from_json(const Json& j) {
  ContentPart p;
  p.kind = parse_part_kind(j.at("kind").get<std::string>());
  p.payload = j.at("payload").get<std::string>();
  if (j.contains("timestamp") && !j["timestamp"].is_null()) p.timestamp = j["timestamp"].get<double>();
  return p;
}

Message message_from_json(const Json& j) {
  std::vector<ContentPart> parts;
  for (const auto& p : j.at("parts")) parts.push_back(content_part_from_json(p));
  return Message::make(parse_role(j.at("role").get<std::string>()), std::move(parts));
}

ToolCall tool_call_from_json(const Json& j) {
  const auto name = j.at("function").get<std::string>();
  const auto f = parse_tool_function(name);
  if (!f) throw Error(ErrorCode::SchemaViolation, "unknown tool function '" + name + "'");
  return {*f, j.at("arguments"), j.at("round_index").get<int>()};
}

Trajectory trajectory_from_json(const Json& j) {
  try {
    Trajectory t;
    t.sample_id = j.at("sample_id").get<std::string>();
    for (const auto& m : j.at("messages")) t.messages.push_back(message_from_json(m));
    for (const auto& c : j.at("tool_history")) t.tool_history.push_back(tool_call_from_json(c));
    if (!j.at("final_answer").is_null()) t.final_answer = j["final_answer"].get<std::string>();
    t.status = parse_status(j.at("status").get<std::string>());
    t.rounds_used = j.at("rounds_used").get<int>();
    const auto& tm = j.at("timing");
    t.timing.generation_ms = tm.at("generation_ms").get<double>();
    t.timing.tool_ms = tm.at("tool_ms").get<double>();
    t.timing.prompt_tokens = tm.value("prompt_tokens", 0LL);
    t.timing.completion_tokens = tm.value("completion_tokens", 0LL);
    t.timing.tool_calls_executed = tm.value("tool_calls_executed", 0);
    return t;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("trajectory record: ") + e.what());
  }
}

}  // namespace vpa
