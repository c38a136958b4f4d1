#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

#include "fixtures.hpp"
#include "vpagent/error.hpp"
#include "vpagent/pipeline.hpp"

using namespace vpa;

namespace {

class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ChatRequest request_for(const std::string& sample, int round, int rollout = 0) {
  ChatRequest r;
  r.messages.push_back(Message::text(Role::user, "question about " + sample));
  r.meta = {"policy", sample, rollout, round};
  return r;
}

}  // namespace

TEST(Script, FirstMatchingStepWins) {
  const auto s = Script::from_json(Json::parse(R"({
    "role": "policy",
    "steps": [
      {"match": {"sample_id": "s1", "round": 0}, "respond": "first", "latency_ms": 12},
      {"match": {"sample_id": "s1"}, "respond": "any round"},
      {"match": {"contains": "magic"}, "respond": "keyword"},
      {"match": {"rollout_index": 3}, "respond": "rollout three"}
    ],
    "default": "<answer>A</answer>"})"));
  ScriptedChatClient c(s);
  const auto r0 = c.complete(request_for("s1", 0));
  EXPECT_EQ(r0.text, "first");
  EXPECT_DOUBLE_EQ(r0.scripted_latency_ms, 12);
  EXPECT_EQ(c.complete(request_for("s1", 4)).text, "any round");
  EXPECT_EQ(c.complete(request_for("magic-sample", 0)).text, "keyword");
  EXPECT_EQ(c.complete(request_for("s9", 0, 3)).text, "rollout three");
  EXPECT_EQ(c.complete(request_for("s9", 0)).text, "<answer>A</answer>");
  EXPECT_EQ(c.calls(), 5u);
  EXPECT_EQ(c.log()[1].round, 4);
}

TEST(Script, NoMatchWithoutDefaultFailsLoudly) {
  ScriptedChatClient c(Script::from_json({{"steps", Json::array()}}));
  try {
    c.complete(request_for("s1", 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
  }
  ScriptedChatClient down(Script::from_json({{"unreachable", true}}));
  try {
    down.complete(request_for("s1", 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClientUnreachable);
  }
}

TEST(Script, CheckedInScriptsParse) {
  for (const auto& name : test::kGoldenScripts) {
    EXPECT_NO_THROW(Script::load(test::data_dir() / "scripts" / (name + ".json"))) << name;
  }
  EXPECT_THROW(Script::from_json(Json::parse(R"({"steps": [{"match": {}}]})")), Error);
}

TEST(WireFormat, FramesExpandToLabelledImages) {
  MemoryAssetStore assets;
  DefaultMediaBackend media;
  const ToolEnvironment env(media, assets, ToolBudget{});
  test::TempDir dir;
  const auto video = media.probe(test::write_synthetic_video(dir.path(), "w", 3));
  const auto ref = env.encode_video_ref(video);
  ChatRequest req;
  req.messages.push_back(Message::text(Role::system, "sys"));
  req.messages.push_back(Message::make(Role::user, {ContentPart::frames(ref), ContentPart::text("q")}));
  req.messages.push_back(Message::text(Role::tool, "InvalidWindow: x"));
  req.meta = {"policy", "s1", 2, 1};
  EndpointConfig ep;
  ep.model = "m";
  ep.tool_message_role = "user";
  const auto body = build_chat_body(req, ep, assets);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["stream"], false);
  EXPECT_EQ(body["messages"][0]["content"], "sys");
  const auto& content = body["messages"][1]["content"];
  ASSERT_EQ(content.size(), 7u);
  EXPECT_EQ(content[0]["text"], "Frame at 0.0s");
  EXPECT_EQ(content[1]["type"], "image_url");
  EXPECT_EQ(content[1]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);
  EXPECT_EQ(content[4]["text"], "Frame at 2.0s");
  EXPECT_EQ(content[6]["text"], "q");
  EXPECT_EQ(body["messages"][2]["role"], "user");
  EXPECT_EQ(body["metadata"]["rollout_index"], "2");
  EXPECT_EQ(body["metadata"]["round"], "1");
}

TEST(WireFormat, ParseResponseBody) {
  const auto r = parse_chat_body(Json::parse(
      R"({"choices":[{"message":{"role":"assistant","content":"<answer>B</answer>"}}],
          "usage":{"prompt_tokens":11,"completion_tokens":3}})"));
  EXPECT_EQ(r.text, "<answer>B</answer>");
  EXPECT_EQ(r.prompt_tokens, 11);
  EXPECT_EQ(r.completion_tokens, 3);
  EXPECT_THROW(parse_chat_body(Json::parse(R"({"choices": []})")), Error);
}

TEST(Http, ChatCompletionsRoundTrip) {
  LocalServer srv;
  Json seen;
  std::string auth;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"content":"<answer>C</answer>"}}],"usage":{"prompt_tokens":5}})",
                    "application/json");
  });
  MemoryAssetStore assets;
  EndpointConfig ep;
  ep.url = srv.url("/v1");
  ep.model = "policy-model";
  ep.api_key = "k";
  auto client = make_chat_client(ep, assets);
  const auto r = client->complete(request_for("s1", 0));
  EXPECT_EQ(r.text, "<answer>C</answer>");
  EXPECT_EQ(r.prompt_tokens, 5);
  EXPECT_EQ(seen["metadata"]["sample_id"], "s1");
  EXPECT_EQ(auth, "Bearer k");
}

TEST(Http, RetriesThenReportsUnreachable) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  MemoryAssetStore assets;
  EndpointConfig ep;
  ep.url = srv.url("/v1");
  ep.retry = {3, 1, 1};
  HttpChatClient client(ep, assets);
  try {
    client.complete(request_for("s1", 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ClientUnreachable);
  }
  EXPECT_EQ(hits.load(), 3);

  ep.url = "http://127.0.0.1:9/v1";
  ep.retry = {2, 1, 1};
  HttpChatClient nowhere(ep, assets);
  EXPECT_THROW(nowhere.complete(request_for("s1", 0)), Error);
}

TEST(Http, SegmentEndpoint) {
  LocalServer srv;
  Json seen;
  srv.server().Post("/segment", [&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    Mask m(4, 2);
    m.set(1, 1);
    res.set_content(Json{{"frame_size", {{"w", 4}, {"h", 2}}}, {"masks", {{"0", rle_encode(m)}}}}.dump(),
                    "application/json");
  });
  EndpointConfig ep;
  ep.url = srv.url();
  auto client = make_segmentation_client(ep);
  const auto doc = client->segment({"s7", "videos/a.mp4", "the red cup on the table", 1.0});
  EXPECT_EQ(seen["tag"], "the red cup on the table");
  EXPECT_EQ(seen["video_path"], "videos/a.mp4");
  EXPECT_EQ(doc["frame_size"]["w"], 4);
  EXPECT_EQ(rle_decode(doc["masks"]["0"]).count(), 1);
}
