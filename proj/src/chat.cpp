#include "vpagent/chat.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <thread>

#include "vpagent/error.hpp"
#include "vpagent/tools.hpp"

namespace vpa {

Json to_json(const EndpointConfig& e, bool redact_secrets) {
  Json j = {{"url", e.url},
            {"model", e.model},
            {"temperature", e.temperature},
            {"max_response_tokens", e.max_response_tokens},
            {"timeout_s", e.timeout_s},
            {"retry", {{"max_attempts", e.retry.max_attempts},
                       {"backoff_ms", e.retry.backoff_ms},
                       {"multiplier", e.retry.multiplier}}},
            {"tool_message_role", e.tool_message_role}};
  if (!e.api_key.empty()) j["api_key"] = redact_secrets ? std::string("<redacted>") : e.api_key;
  return j;
}

EndpointConfig endpoint_from_json(const Json& j) {
  EndpointConfig e;
  e.url = j.value("url", std::string{});
  e.model = j.value("model", std::string{});
  e.api_key = j.value("api_key", std::string{});
  e.temperature = j.value("temperature", 0.0);
  e.max_response_tokens = j.value("max_response_tokens", 4096);
  e.timeout_s = j.value("timeout_s", 120.0);
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    e.retry.max_attempts = r.value("max_attempts", e.retry.max_attempts);
    e.retry.backoff_ms = r.value("backoff_ms", e.retry.backoff_ms);
    e.retry.multiplier = r.value("multiplier", e.retry.multiplier);
  }
  e.tool_message_role = j.value("tool_message_role", e.tool_message_role);
  if (e.temperature < 0) throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
  if (e.retry.max_attempts < 1) throw Error(ErrorCode::ConfigError, "retry.max_attempts must be >= 1");
  if (e.tool_message_role != "tool" && e.tool_message_role != "user") {
    throw Error(ErrorCode::ConfigError, "tool_message_role must be 'tool' or 'user'");
  }
  return e;
}

namespace {

void append_image(Json& content, const AssetStore& assets, const std::string& ref, std::optional<double> ts) {
  if (ts) content.push_back({{"type", "text"}, {"text", frame_label(*ts)}});
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", to_png_data_url(assets.get_image(ref))}}}});
}

Json wire_message(const Message& m, const EndpointConfig& endpoint, const AssetStore& assets) {
  std::string role(to_string(m.role));
  if (m.role == Role::tool) role = endpoint.tool_message_role;
  const bool text_only =
      std::all_of(m.parts.begin(), m.parts.end(), [](const ContentPart& p) { return p.kind == PartKind::text; });
  if (text_only) return {{"role", role}, {"content", m.text()}};
  Json content = Json::array();
  for (const auto& p : m.parts) {
    switch (p.kind) {
      case PartKind::text:
        content.push_back({{"type", "text"}, {"text", p.payload}});
        break;
      case PartKind::image_ref:
        append_image(content, assets, p.payload, p.timestamp);
        break;
      case PartKind::frame_sequence_ref: {
        const auto doc = parse_sequence_document(assets.get_document(p.payload));
        for (const auto& [ref, ts] : doc.frames) append_image(content, assets, ref, ts);
        break;
      }
    }
  }
  return {{"role", role}, {"content", std::move(content)}};
}

}  // namespace

Json build_chat_body(const ChatRequest& request, const EndpointConfig& endpoint, const AssetStore& assets) {
  Json messages = Json::array();
  for (const auto& m : request.messages) messages.push_back(wire_message(m, endpoint, assets));
  return {{"model", endpoint.model},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens},
          {"stream", false},
          {"metadata", {{"role", request.meta.role},
                        {"sample_id", request.meta.sample_id},
                        {"rollout_index", std::to_string(request.meta.rollout_index)},
                        {"round", std::to_string(request.meta.round)}}}};
}

ChatResponse parse_chat_body(const Json& body) {
  try {
    ChatResponse r;
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) {
      r.text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content) {
        if (part.value("type", "") == "text") r.text += part.value("text", "");
      }
    } else if (!content.is_null()) {
      throw Error(ErrorCode::UnparseableVerdict, "message.content has unexpected type");
    }
    if (body.contains("usage") && body["usage"].is_object()) {
      r.prompt_tokens = body["usage"].value("prompt_tokens", 0LL);
      r.completion_tokens = body["usage"].value("completion_tokens", 0LL);
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::UnparseableVerdict, std::string("chat response: ") + e.what());
  }
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint url lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

HttpChatClient::HttpChatClient(EndpointConfig endpoint, const AssetStore& assets)
    : endpoint_(std::move(endpoint)), assets_(assets) {
  auto [origin, path] = split_url(endpoint_.url);
  origin_ = std::move(origin);
  constexpr std::string_view suffix = "/chat/completions";
  path_ = path.ends_with(suffix) ? path : path + std::string(suffix);
}

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
  const auto body = build_chat_body(request, endpoint_, assets_).dump();
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

  double backoff = endpoint_.retry.backoff_ms;
  std::string last_error;
  for (int attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(endpoint_.timeout_s * 1000));
    client.set_connection_timeout(std::min<std::chrono::milliseconds>(timeout, std::chrono::seconds(10)));
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (res && res->status == 200) {
      auto doc = Json::parse(res->body, nullptr, false);
      if (doc.is_discarded()) throw Error(ErrorCode::UnparseableVerdict, "chat response is not JSON");
      return parse_chat_body(doc);
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      // Client errors other than rate limiting will not improve on retry.
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    spdlog::warn("{} request to {} failed (attempt {}/{}): {}", request.meta.role, endpoint_.url, attempt,
                 endpoint_.retry.max_attempts, last_error);
    if (attempt < endpoint_.retry.max_attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff));
      backoff *= endpoint_.retry.multiplier;
    }
  }
  throw Error(ErrorCode::ClientUnreachable, endpoint_.url + ": " + last_error);
}

Script Script::from_json(const Json& j) {
  try {
    Script s;
    s.role = j.value("role", std::string{});
    for (const auto& st : j.value("steps", Json::array())) {
      Step step;
      const auto match = st.value("match", Json::object());
      if (match.contains("sample_id")) step.sample_id = match["sample_id"].get<std::string>();
      if (match.contains("round")) step.round = match["round"].get<int>();
      if (match.contains("rollout_index")) step.rollout_index = match["rollout_index"].get<int>();
      if (match.contains("contains")) step.contains = match["contains"].get<std::string>();
      step.respond = st.at("respond").get<std::string>();
      step.latency_ms = st.value("latency_ms", 0.0);
      s.steps.push_back(std::move(step));
    }
    if (j.contains("default") && j["default"].is_string()) s.fallback = j["default"].get<std::string>();
    s.unreachable = j.value("unreachable", false);
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("script: ") + e.what());
  }
}

Script Script::load(const std::filesystem::path& path) {
  auto doc = Json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::ConfigError, "script is not JSON: " + path.string());
  return from_json(doc);
}

std::optional<std::size_t> Script::match(const RequestMeta& meta, std::string_view text) const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (s.sample_id && *s.sample_id != meta.sample_id) continue;
    if (s.round && *s.round != meta.round) continue;
    if (s.rollout_index && *s.rollout_index != meta.rollout_index) continue;
    if (s.contains && text.find(*s.contains) == std::string_view::npos) continue;
    return i;
  }
  return std::nullopt;
}

std::string request_text(const ChatRequest& request) {
  std::string out;
  for (const auto& m : request.messages) {
    out += m.text();
    out += '\n';
  }
  return out;
}

ScriptedChatClient::ScriptedChatClient(Script script) : script_(std::move(script)) {}

ChatResponse ScriptedChatClient::complete(const ChatRequest& request) {
  ++calls_;
  {
    std::lock_guard lock(mu_);
    log_.push_back(request.meta);
  }
  if (script_.unreachable) throw Error(ErrorCode::ClientUnreachable, "scripted endpoint marked unreachable");
  ChatResponse r;
  if (auto i = script_.match(request.meta, request_text(request))) {
    r.text = script_.steps[*i].respond;
    r.scripted_latency_ms = script_.steps[*i].latency_ms;
  } else if (script_.fallback) {
    r.text = *script_.fallback;
  } else {
    throw Error(ErrorCode::SchemaViolation, "no script step matches " + request.meta.role + " request for '" +
                                                request.meta.sample_id + "' round " +
                                                std::to_string(request.meta.round));
  }
  return r;
}

std::vector<RequestMeta> ScriptedChatClient::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::unique_ptr<ChatClient> make_chat_client(const EndpointConfig& endpoint, const AssetStore& assets) {
  constexpr std::string_view scripted = "scripted:";
  if (endpoint.url.starts_with(scripted)) {
    return std::make_unique<ScriptedChatClient>(Script::load(endpoint.url.substr(scripted.size())));
  }
  return std::make_unique<HttpChatClient>(endpoint, assets);
}

}  // namespace vpa
