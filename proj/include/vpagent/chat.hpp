#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vpagent/asset_store.hpp"
#include "vpagent/trajectory.hpp"

namespace vpa {

/// Routing metadata carried with every request. Sent over the wire as the
/// `metadata` object so scripted servers can match on it.
struct RequestMeta {
  std::string role;  // policy, judge, filter, verifier, rewriter
  std::string sample_id;
  int rollout_index = 0;
  int round = 0;
};

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0;
  int max_tokens = 4096;
  RequestMeta meta;
};

struct ChatResponse {
  std::string text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  /// Latency declared by a scripted backend; 0 for live endpoints.
  double scripted_latency_ms = 0;
};

/// Any chat-completions style backend. Implementations must tolerate
/// concurrent calls. Transport failures (after retries) raise
/// ClientUnreachable.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_ms = 500;
  double multiplier = 2.0;
};

struct EndpointConfig {
  /// Base URL ("http://host:8000/v1"), or "scripted:<script.json>" for an
  /// in-process scripted backend.
  std::string url;
  std::string model;
  std::string api_key;
  double temperature = 0;
  int max_response_tokens = 4096;
  double timeout_s = 120;
  RetryPolicy retry;
  /// Role used for tool results on the wire ("tool" or "user").
  std::string tool_message_role = "tool";
};

Json to_json(const EndpointConfig& e, bool redact_secrets);
EndpointConfig endpoint_from_json(const Json& j);

/// Chat-completions request body. Frame-sequence parts expand into
/// "Frame at {t}s" text parts each followed by an inline PNG data URL;
/// text-only messages are sent with string content.
Json build_chat_body(const ChatRequest& request, const EndpointConfig& endpoint, const AssetStore& assets);
/// Reads choices[0].message.content and usage. Throws UnparseableVerdict on shape errors.
ChatResponse parse_chat_body(const Json& body);

class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(EndpointConfig endpoint, const AssetStore& assets);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  EndpointConfig endpoint_;
  const AssetStore& assets_;
  std::string origin_;
  std::string path_;
};

/// Script document shared with the mock server:
///
///   {"role": "policy",
///    "steps": [{"match": {"sample_id": "s1", "round": 0, "rollout_index": 0,
///                         "contains": "text"},
///               "respond": "<answer>A</answer>", "latency_ms": 5}],
///    "default": "<answer>A</answer>",
///    "unreachable": false}
///
/// The first step whose every given predicate holds answers; otherwise the
/// default, otherwise the request fails loudly (SchemaViolation).
struct Script {
  struct Step {
    std::optional<std::string> sample_id;
    std::optional<int> round;
    std::optional<int> rollout_index;
    std::optional<std::string> contains;
    std::string respond;
    double latency_ms = 0;
  };
  std::string role;
  std::vector<Step> steps;
  std::optional<std::string> fallback;
  bool unreachable = false;

  static Script from_json(const Json& j);
  static Script load(const std::filesystem::path& path);
  /// Index of the matching step, or nullopt.
  std::optional<std::size_t> match(const RequestMeta& meta, std::string_view request_text) const;
};

/// Concatenated text of all request messages (what "contains" scans).
std::string request_text(const ChatRequest& request);

class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(Script script);
  ChatResponse complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::vector<RequestMeta> log() const;

 private:
  Script script_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::vector<RequestMeta> log_;
};

/// Backend defined by a callable; convenient for stochastic test policies.
class FunctionChatClient final : public ChatClient {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit FunctionChatClient(Fn fn) : fn_(std::move(fn)) {}
  ChatResponse complete(const ChatRequest& request) override {
    ++calls_;
    return fn_(request);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::atomic<std::size_t> calls_{0};
};

/// HTTP or scripted client depending on the endpoint URL scheme.
std::unique_ptr<ChatClient> make_chat_client(const EndpointConfig& endpoint, const AssetStore& assets);

}  // namespace vpa
