#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vpagent/error.hpp"
#include "vpagent/rollout.hpp"

using namespace vpa;

namespace {

std::vector<Role> roles(const Trajectory& t) {
  std::vector<Role> out;
  for (const auto& m : t.messages) out.push_back(m.role);
  return out;
}

struct Harness {
  test::TempDir dir;
  DefaultMediaBackend media;
  MemoryAssetStore assets;
  ToolEnvironment env{media, assets, ToolBudget{}};
  fs::path video = test::write_synthetic_video(dir.path(), "clip", 8);

  std::vector<Sample> samples(int n) const {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
      out.push_back(test::make_sample("s" + std::to_string(i), video, "Which colour fills the frame?", "C",
                                      std::vector<std::string>{"Red", "Blue", "Olive", "White"}));
    }
    return out;
  }
};

FunctionChatClient echo_policy() {
  return FunctionChatClient([](const ChatRequest& req) {
    ChatResponse r;
    if (req.meta.round == 0 && req.meta.sample_id != "s3") {
      r.text = "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 1, \"end\": 3}}</tool_call>";
    } else {
      r.text = "<answer>" + req.meta.sample_id + "</answer>";
    }
    r.scripted_latency_ms = 10;
    return r;
  });
}

}  // namespace

TEST(Golden, TranscriptsAreByteIdentical) {
  for (const auto& name : test::kGoldenScripts) {
    const auto record = test::golden_record(test::golden_trajectory(name));
    const auto path = test::golden_transcript_path(name);
    if (test::update_goldens()) {
      write_file(path, record);
      continue;
    }
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(read_file(path), record) << name;
    EXPECT_EQ(test::golden_record(test::golden_trajectory(name)), record) << name;
  }
}

TEST(Golden, AnswerAtFirstRound) {
  const auto t = test::golden_trajectory("answer_at_0");
  EXPECT_EQ(t.status, TrajectoryStatus::answered);
  EXPECT_EQ(t.rounds_used, 0);
  EXPECT_TRUE(t.tool_history.empty());
  EXPECT_EQ(t.final_answer, "B");
  EXPECT_EQ(roles(t), (std::vector<Role>{Role::user, Role::assistant}));
  EXPECT_DOUBLE_EQ(t.timing.generation_ms, 180);
}

TEST(Golden, TwoToolsThenAnswer) {
  const auto t = test::golden_trajectory("two_tool_then_answer");
  EXPECT_EQ(t.status, TrajectoryStatus::answered);
  EXPECT_EQ(t.rounds_used, 2);
  ASSERT_EQ(t.tool_history.size(), 2u);
  EXPECT_EQ(t.tool_history[0].function, ToolFunction::view_visual_prompt);
  EXPECT_EQ(t.tool_history[1].function, ToolFunction::crop_video);
  EXPECT_EQ(t.tool_history[1].round_index, 1);
  EXPECT_EQ(roles(t), (std::vector<Role>{Role::user, Role::assistant, Role::tool, Role::assistant, Role::tool,
                                         Role::assistant}));
  ASSERT_EQ(t.messages[0].parts.size(), 2u);
  EXPECT_EQ(t.messages[0].parts[0].kind, PartKind::frame_sequence_ref);
  EXPECT_NE(t.messages[0].parts[1].payload.find("images/vp_frame.ppm"), std::string::npos);
  EXPECT_NE(t.messages[0].parts[1].payload.find("the target in the highlighted box"), std::string::npos);
  EXPECT_EQ(t.messages[2].parts[0].kind, PartKind::image_ref);
  EXPECT_EQ(t.messages[4].parts[0].kind, PartKind::frame_sequence_ref);
  EXPECT_EQ(t.timing.tool_calls_executed, 2);
  EXPECT_DOUBLE_EQ(t.timing.generation_ms, 600);
  EXPECT_DOUBLE_EQ(t.timing.tool_ms, 0);
}

TEST(Golden, NeverAnswerExhaustsBudget) {
  const auto t = test::golden_trajectory("never_answer");
  EXPECT_EQ(t.status, TrajectoryStatus::exhausted);
  EXPECT_FALSE(t.final_answer);
  EXPECT_EQ(t.rounds_used, 6);
  EXPECT_EQ(t.timing.tool_calls_executed, 5);
  EXPECT_EQ(t.tool_history.size(), 6u);
  EXPECT_EQ(t.assistant_turns().size(), 6u);
  EXPECT_EQ(t.messages.back().role, Role::assistant);

  ToolBudget zero;
  zero.t_max = 0;
  const auto z = test::golden_trajectory("never_answer", zero);
  EXPECT_EQ(z.status, TrajectoryStatus::exhausted);
  EXPECT_EQ(z.rounds_used, 1);
  EXPECT_EQ(z.timing.tool_calls_executed, 0);
}

TEST(Loop, MalformedTurnFeedsErrorBack) {
  Harness h;
  FunctionChatClient policy([](const ChatRequest& req) {
    ChatResponse r;
    r.text = req.meta.round == 0 ? "<tool_call>{not json}</tool_call>" : "<answer>C</answer>";
    return r;
  });
  const RolloutEngine engine(policy, h.env);
  const auto t = engine.run_trajectory(h.samples(1)[0]);
  EXPECT_EQ(t.status, TrajectoryStatus::answered);
  EXPECT_EQ(t.rounds_used, 1);
  ASSERT_EQ(t.messages.size(), 4u);
  EXPECT_EQ(t.messages[2].role, Role::tool);
  EXPECT_EQ(t.messages[2].text().rfind("MalformedToolCall: ", 0), 0u);
  EXPECT_TRUE(t.tool_history.empty());
}

TEST(Loop, UnreachablePolicyIsAnErrorTrajectory) {
  Harness h;
  FunctionChatClient down([](const ChatRequest&) -> ChatResponse {
    throw Error(ErrorCode::ClientUnreachable, "refused");
  });
  const RolloutEngine engine(down, h.env);
  const auto t = engine.run_trajectory(h.samples(1)[0]);
  EXPECT_EQ(t.status, TrajectoryStatus::error);
  EXPECT_FALSE(t.final_answer);
  EXPECT_THROW(engine.run_group(h.samples(1)[0], 3, [](const Trajectory&, int) { return RewardBreakdown{}; }),
               Error);
}

TEST(Loop, DirectModeNeverExecutesTools) {
  Harness h;
  FunctionChatClient policy([](const ChatRequest& req) {
    EXPECT_EQ(req.messages[0].text().find("crop_video"), std::string::npos);
    ChatResponse r;
    r.text = "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 1, \"end\": 3}}</tool_call> C";
    return r;
  });
  RolloutSettings settings;
  settings.agent = false;
  const RolloutEngine engine(policy, h.env, settings);
  const auto t = engine.run_trajectory(h.samples(1)[0]);
  EXPECT_EQ(t.status, TrajectoryStatus::answered);
  EXPECT_TRUE(t.tool_history.empty());
  EXPECT_EQ(t.timing.tool_calls_executed, 0);
  EXPECT_EQ(t.messages.size(), 2u);
}

TEST(Loop, RoundBoundHoldsForRandomPolicies) {
  Harness h;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    FunctionChatClient policy([seed](const ChatRequest& req) {
      ChatResponse r;
      const auto roll = derive_seed(seed, req.meta.sample_id, static_cast<std::uint64_t>(req.meta.round)) % 10;
      if (roll == 0) r.text = "<answer>C</answer>";
      else if (roll < 3) r.text = "<tool_call>{broken";
      else if (roll < 5) r.text = "thinking only";
      else r.text = "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 0, \"end\": 2}}</tool_call>";
      return r;
    });
    ToolBudget b;
    b.t_max = static_cast<int>(seed % 6);
    const ToolEnvironment env(h.media, h.assets, b);
    const RolloutEngine engine(policy, env, RolloutSettings{0, 4096, true, Clock::virtual_clock});
    const auto t = engine.run_trajectory(h.samples(1)[0]);
    EXPECT_LE(t.rounds_used, b.t_max + 1);
    EXPECT_LE(t.timing.tool_calls_executed, b.t_max);
    EXPECT_EQ(t.status == TrajectoryStatus::exhausted, t.rounds_used > b.t_max && !t.final_answer);
    EXPECT_LE(static_cast<int>(t.assistant_turns().size()), b.t_max + 1);
  }
}

TEST(Group, AdvantagesFromPassPattern) {
  Harness h;
  FunctionChatClient policy([](const ChatRequest& req) {
    ChatResponse r;
    r.text = req.meta.rollout_index < 2 ? "<answer>C</answer>" : "<answer>A</answer>";
    return r;
  });
  const RolloutEngine engine(policy, h.env);
  const auto group = engine.run_group(
      h.samples(1)[0], 4,
      [](const Trajectory& t, int) {
        RewardBreakdown r;
        r.total = t.final_answer == "C" ? 1.0 : 0.0;
        return r;
      },
      2);
  ASSERT_EQ(group.advantages.size(), 4u);
  EXPECT_EQ(group.advantages, (std::vector<double>{1, 1, -1, -1}));
  const auto records = reward_records(group);
  EXPECT_EQ(records[3]["rollout_index"], 3);
  EXPECT_EQ(records[3]["advantage"], -1.0);
}

TEST(Batch, OrderAndConcurrencyEquivalence) {
  Harness h;
  auto policy = echo_policy();
  const RolloutEngine engine(policy, h.env, RolloutSettings{0, 4096, true, Clock::virtual_clock});
  const auto samples = h.samples(12);
  test::TempDir a;
  test::TempDir b;
  const auto serial = engine.run_batch(samples, {1, a.path(), false, nullptr});
  const auto parallel = engine.run_batch(samples, {4, b.path(), false, nullptr});
  ASSERT_EQ(serial.trajectories.size(), 12u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(serial.trajectories[i].sample_id, samples[i].sample_id);
    EXPECT_EQ(serial.trajectories[i], parallel.trajectories[i]);
  }
  EXPECT_EQ(read_file(a / "trajectories.jsonl"), read_file(b / "trajectories.jsonl"));
  EXPECT_THROW(engine.run_batch(samples, {1, a.path(), false, nullptr}), Error);
}

TEST(Batch, ResumeSkipsCheckpointedSamples) {
  Harness h;
  auto policy = echo_policy();
  const RolloutEngine engine(policy, h.env, RolloutSettings{0, 4096, true, Clock::virtual_clock});
  const auto samples = h.samples(6);
  test::TempDir full;
  engine.run_batch(samples, {1, full.path(), false, nullptr});

  test::TempDir partial;
  std::atomic<bool> stop{false};
  std::atomic<int> started{0};
  FunctionChatClient stopping([&](const ChatRequest& req) {
    if (req.meta.round == 0 && ++started == 3) stop = true;
    return policy.complete(req);
  });
  const RolloutEngine first(stopping, h.env, RolloutSettings{0, 4096, true, Clock::virtual_clock});
  const auto cut = first.run_batch(samples, {1, partial.path(), false, &stop});
  EXPECT_TRUE(cut.interrupted);
  EXPECT_LT(cut.trajectories.size(), samples.size());

  const auto calls_before = policy.calls();
  const auto resumed = engine.run_batch(samples, {1, partial.path(), true, nullptr});
  EXPECT_EQ(resumed.resumed, cut.trajectories.size());
  EXPECT_FALSE(resumed.interrupted);
  EXPECT_LT(policy.calls() - calls_before, 2 * samples.size());
  EXPECT_EQ(read_file(partial / "trajectories.jsonl"), read_file(full / "trajectories.jsonl"));
}

TEST(Batch, FailuresBecomeErrorRecords) {
  Harness h;
  auto policy = echo_policy();
  const RolloutEngine engine(policy, h.env);
  auto samples = h.samples(3);
  samples[1].video = VideoRef{h.dir / "missing.synth.json"};
  const auto out = engine.run_batch(samples, {2, std::nullopt, false, nullptr});
  ASSERT_EQ(out.trajectories.size(), 3u);
  EXPECT_EQ(out.trajectories[0].status, TrajectoryStatus::answered);
  EXPECT_EQ(out.trajectories[1].status, TrajectoryStatus::error);
  EXPECT_EQ(out.trajectories[2].status, TrajectoryStatus::answered);
}
