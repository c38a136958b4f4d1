#include "vpagent/response_parser.hpp"

#include "vpagent/error.hpp"

namespace vpa {

namespace {

struct TagHit {
  std::size_t pos = std::string_view::npos;
  std::string_view tag;
};

// Earliest occurrence of any of the given tags at or after `from`.
TagHit find_first(std::string_view text, std::size_t from, std::initializer_list<std::string_view> tags) {
  TagHit best;
  for (auto tag : tags) {
    const auto p = text.find(tag, from);
    if (p < best.pos) best = {p, tag};
  }
  return best;
}

ToolCall parse_tool_call_body(std::string_view body, std::size_t offset, int round_index) {
  auto doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ParseError(ErrorCode::MalformedToolCall, offset, "tool_call body is not an object");
  }
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw ParseError(ErrorCode::MalformedToolCall, offset, "tool_call lacks a string 'name'");
  }
  const auto name = doc["name"].get<std::string>();
  const auto fn = parse_tool_function(name);
  if (!fn) throw ParseError(ErrorCode::MalformedToolCall, offset, "unknown tool '" + name + "'");
  Json args = doc.contains("arguments") ? doc["arguments"] : Json::object();
  // Some servers emit arguments as a JSON-encoded string.
  if (args.is_string()) {
    args = Json::parse(args.get<std::string>(), nullptr, false);
    if (args.is_discarded()) {
      throw ParseError(ErrorCode::MalformedToolCall, offset, "arguments string is not JSON");
    }
  }
  if (const auto why = argument_schema_violation(*fn, args); !why.empty()) {
    throw ParseError(ErrorCode::MalformedToolCall, offset, name + ": " + why);
  }
  return ToolCall{*fn, std::move(args), round_index};
}

}  // namespace

ResponseBlocks parse_response(std::string_view text, int round_index) {
  ResponseBlocks out;
  std::size_t cursor = 0;
  for (;;) {
    const auto open = find_first(text, cursor, {kToolCallOpen, kAnswerOpen});
    if (open.pos == std::string_view::npos) break;
    const std::size_t body_start = open.pos + open.tag.size();

    if (open.tag == kToolCallOpen) {
      const auto close = text.find(kToolCallClose, body_start);
      if (close == std::string_view::npos) {
        throw ParseError(ErrorCode::MalformedToolCall, open.pos, "unclosed <tool_call>");
      }
      const auto inner = find_first(text.substr(0, close), body_start, {kToolCallOpen, kAnswerOpen, kAnswerClose});
      if (inner.pos != std::string_view::npos) {
        throw ParseError(ErrorCode::MalformedToolCall, inner.pos, "nested tag inside <tool_call>");
      }
      out.tool_calls.push_back(parse_tool_call_body(text.substr(body_start, close - body_start), open.pos, round_index));
      cursor = close + kToolCallClose.size();
      continue;
    }

    const auto close = text.find(kAnswerClose, body_start);
    if (close == std::string_view::npos) {
      // An unterminated answer tag never forms a block.
      cursor = body_start;
      continue;
    }
    const auto inner = find_first(text.substr(0, close), body_start, {kToolCallOpen, kToolCallClose, kAnswerOpen});
    if (inner.pos != std::string_view::npos) {
      throw ParseError(ErrorCode::MalformedToolCall, inner.pos, "tag overlapping an <answer> block");
    }
    if (out.answer) throw ParseError(ErrorCode::DuplicateAnswer, open.pos, "second <answer> block");
    out.answer = trim(text.substr(body_start, close - body_start));
    out.answer_position = out.tool_calls.size();
    cursor = close + kAnswerClose.size();
  }
  return out;
}

std::string extract_answer(std::string_view text) {
  const auto open = text.find(kAnswerOpen);
  if (open == std::string_view::npos) throw Error(ErrorCode::NoAnswerBlock, "no <answer> tag");
  const auto start = open + kAnswerOpen.size();
  const auto close = text.find(kAnswerClose, start);
  if (close == std::string_view::npos) throw Error(ErrorCode::NoAnswerBlock, "unterminated <answer> tag");
  return trim(text.substr(start, close - start));
}

bool has_answer_block(std::string_view text) {
  const auto open = text.find(kAnswerOpen);
  return open != std::string_view::npos && text.find(kAnswerClose, open + kAnswerOpen.size()) != std::string_view::npos;
}

}  // namespace vpa
