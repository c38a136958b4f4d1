#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vpagent/error.hpp"
#include "vpagent/reward.hpp"

using namespace vpa;

namespace {

std::unique_ptr<FunctionChatClient> judge_saying(std::string verdict, std::atomic<int>* calls = nullptr) {
  return std::make_unique<FunctionChatClient>([verdict, calls](const ChatRequest&) {
    if (calls) ++*calls;
    ChatResponse r;
    r.text = verdict;
    return r;
  });
}

Trajectory answered_with_tools(int tool_calls) {
  Trajectory t;
  t.sample_id = "s";
  t.messages.push_back(Message::text(Role::user, "q"));
  for (int i = 0; i < tool_calls; ++i) {
    t.messages.push_back(Message::text(
        Role::assistant, "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 0, \"end\": 2}}</tool_call>"));
    t.messages.push_back(Message::text(Role::tool, "frames"));
    t.tool_history.push_back({ToolFunction::crop_video, {{"start", 0}, {"end", 2}}, i});
  }
  t.messages.push_back(Message::text(Role::assistant, "<think>ok</think><answer>the red cup</answer>"));
  t.final_answer = "the red cup";
  t.status = TrajectoryStatus::answered;
  t.rounds_used = tool_calls + 1;
  return t;
}

// Independent scalar evaluation of the clipped surrogate.
double oracle_surrogate(const SurrogateInputs& in, double eps) {
  double total = 0;
  for (const auto& tr : in.trajectories) {
    double s = 0;
    double kl = 0;
    int n = 0;
    for (std::size_t t = 0; t < tr.log_ratios.size(); ++t) {
      if (!tr.mask[t]) continue;
      const double r = std::exp(tr.log_ratios[t]);
      const double clipped = r < 1 - eps ? 1 - eps : (r > 1 + eps ? 1 + eps : r);
      s += (r < clipped ? r : clipped) * tr.advantage;
      kl += tr.kl.empty() ? 0 : tr.kl[t];
      ++n;
    }
    total += s / n - in.beta_kl * kl / n;
  }
  return total / static_cast<double>(in.trajectories.size());
}

}  // namespace

TEST(Reward, IntegratedWorkedExample) {
  RewardConfig cfg;
  EXPECT_NEAR(integrated_reward(0.5, 1.0, parsimony_reward(3, 0.1), cfg), 0.585, 1e-12);
  EXPECT_NEAR(integrated_reward(1, 1, 1, cfg), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(integrated_reward(0, 0, 0, cfg), 0.0);
}

TEST(Reward, ParsimonyCurve) {
  EXPECT_DOUBLE_EQ(parsimony_reward(0, 0.1), 1.0);
  EXPECT_NEAR(parsimony_reward(2, 0.1), 0.8, 1e-12);
  EXPECT_NEAR(parsimony_reward(10, 0.1), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(parsimony_reward(25, 0.1), 0.0);
  for (long long n = 0; n < 40; ++n) {
    EXPECT_GE(parsimony_reward(n, 0.1), 0.0);
    EXPECT_LE(parsimony_reward(n + 1, 0.1), parsimony_reward(n, 0.1));
  }
}

TEST(Reward, WeightValidation) {
  RewardConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 0.9;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WeightSumViolation);
  }
  cfg = {};
  cfg.lambda = -1;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(to_json(reward_config_from_json(to_json(RewardConfig{}))), to_json(RewardConfig{}));
}

TEST(Reward, IntegratedStaysInUnitInterval) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 5000; ++i) {
    const double a = u(rng);
    const double b = u(rng) * (1 - a);
    RewardConfig cfg;
    cfg.alpha = a;
    cfg.beta = b;
    cfg.gamma = 1 - a - b;
    const double acc = std::vector<double>{0, 0.5, 1}[rng() % 3];
    const double r = integrated_reward(acc, static_cast<double>(rng() % 2), parsimony_reward(rng() % 15, 0.1), cfg);
    EXPECT_GE(r, -1e-12);
    EXPECT_LE(r, 1 + 1e-12);
  }
}

TEST(Verdict, ParsingAndScores) {
  EXPECT_EQ(parse_verdict("Correct"), Verdict::correct);
  EXPECT_EQ(parse_verdict("Verdict: PARTIALLY CORRECT."), Verdict::partially_correct);
  EXPECT_EQ(parse_verdict("incorrect"), Verdict::incorrect);
  EXPECT_FALSE(parse_verdict("no idea"));
  EXPECT_FALSE(parse_verdict("correct or incorrect"));
  EXPECT_DOUBLE_EQ(verdict_score(Verdict::correct), 1.0);
  EXPECT_DOUBLE_EQ(verdict_score(Verdict::partially_correct), 0.5);
  EXPECT_DOUBLE_EQ(verdict_score(Verdict::incorrect), 0.0);
}

TEST(Accuracy, ExactMatchSkipsJudge) {
  std::atomic<int> calls{0};
  auto chat = judge_saying("incorrect", &calls);
  const JudgeClient judge(*chat);
  EXPECT_DOUBLE_EQ(accuracy_reward(" B ", "B", judge), 1.0);
  EXPECT_EQ(calls.load(), 0);
  EXPECT_DOUBLE_EQ(accuracy_reward("C", "B", judge), 0.0);
  EXPECT_EQ(calls.load(), 1);
}

TEST(Accuracy, MalformedVerdictScoresZeroAndUnreachablePropagates) {
  auto garbled = judge_saying("hmm, maybe");
  EXPECT_DOUBLE_EQ(accuracy_reward("x", "y", JudgeClient(*garbled)), 0.0);
  FunctionChatClient down([](const ChatRequest&) -> ChatResponse {
    throw Error(ErrorCode::ClientUnreachable, "down");
  });
  try {
    accuracy_reward("x", "y", JudgeClient(down));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::JudgeUnreachable);
  }
}

TEST(Format, WellFormedAndViolations) {
  EXPECT_DOUBLE_EQ(format_reward(answered_with_tools(2)), 1.0);
  auto bad_turn = answered_with_tools(1);
  bad_turn.messages[1] = Message::text(Role::assistant, "<tool_call>{oops}</tool_call>");
  EXPECT_DOUBLE_EQ(format_reward(bad_turn), 0.0);
  auto early = answered_with_tools(1);
  early.messages[1] = Message::text(Role::assistant, "<answer>x</answer>");
  EXPECT_DOUBLE_EQ(format_reward(early), 0.0);
  auto empty = answered_with_tools(0);
  empty.messages.back() = Message::text(Role::assistant, "<answer> </answer>");
  EXPECT_DOUBLE_EQ(format_reward(empty), 0.0);
  auto exhausted = answered_with_tools(1);
  exhausted.messages.pop_back();
  exhausted.final_answer.reset();
  exhausted.status = TrajectoryStatus::exhausted;
  EXPECT_DOUBLE_EQ(format_reward(exhausted), 0.0);
  auto no_think = answered_with_tools(0);
  no_think.messages.back() = Message::text(Role::assistant, "<answer>the red cup</answer>");
  EXPECT_DOUBLE_EQ(format_reward(no_think), 1.0);
  EXPECT_DOUBLE_EQ(format_reward(no_think, FormatSchema{true}), 0.0);
}

TEST(Scoring, PartialCreditWithThreeToolCalls) {
  auto chat = judge_saying("partially correct");
  const JudgeClient judge(*chat);
  const auto r = score_trajectory(answered_with_tools(3), "the red mug", "what?", judge, RewardConfig{});
  EXPECT_DOUBLE_EQ(r.acc, 0.5);
  EXPECT_DOUBLE_EQ(r.format, 1.0);
  EXPECT_NEAR(r.parsimony, 0.7, 1e-12);
  EXPECT_NEAR(r.total, 0.585, 1e-12);
  EXPECT_FALSE(r.pending);
}

TEST(Scoring, RoundsCountingMode) {
  auto t = answered_with_tools(0);
  t.messages.insert(t.messages.begin() + 1,
                    Message::text(Role::assistant,
                                  "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 0, \"end\": 1}}"
                                  "</tool_call><tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 1, "
                                  "\"end\": 2}}</tool_call>"));
  t.messages.insert(t.messages.begin() + 2, Message::text(Role::tool, "a"));
  t.messages.insert(t.messages.begin() + 3, Message::text(Role::tool, "b"));
  t.tool_history = {{ToolFunction::crop_video, {{"start", 0}, {"end", 1}}, 0},
                    {ToolFunction::crop_video, {{"start", 1}, {"end", 2}}, 0}};
  EXPECT_EQ(parsimony_count(t, ParsimonyCount::invocations), 2);
  EXPECT_EQ(parsimony_count(t, ParsimonyCount::rounds), 1);
}

TEST(Scoring, JudgeOutageLeavesRewardPending) {
  std::atomic<int> calls{0};
  FunctionChatClient down([&](const ChatRequest&) -> ChatResponse {
    ++calls;
    throw Error(ErrorCode::ClientUnreachable, "down");
  });
  const JudgeClient judge(down);
  const auto r = score_trajectory(answered_with_tools(0), "gold", "q", judge, RewardConfig{});
  EXPECT_TRUE(r.pending);
  EXPECT_DOUBLE_EQ(r.acc, 0);
  EXPECT_EQ(calls.load(), 3);
}

TEST(Advantages, NormalisedWithPopulationStd) {
  const std::vector<double> r = {1, 1, 0, 0};
  const auto a = group_advantages(r);
  EXPECT_DOUBLE_EQ(a[0], 1);
  EXPECT_DOUBLE_EQ(a[2], -1);
  const std::vector<double> same(8, 0.585);
  for (double v : group_advantages(same)) EXPECT_EQ(v, 0.0);
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> g(2 + rng() % 15);
    for (auto& v : g) v = u(rng);
    const auto adv = group_advantages(g);
    double mean = 0;
    double sq = 0;
    for (double v : adv) mean += v;
    for (double v : adv) sq += v * v;
    EXPECT_NEAR(mean / g.size(), 0, 1e-9);
    EXPECT_NEAR(sq / g.size(), 1, 1e-9);
    auto shifted = g;
    for (auto& v : shifted) v += 0.25;
    const auto adv2 = group_advantages(shifted);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(adv2[k], adv[k], 1e-12);
  }
}

TEST(Surrogate, ClippingCases) {
  const auto single = [](double ratio, double adv) {
    SurrogateInputs in;
    in.trajectories.push_back({{std::log(ratio)}, {1}, adv, {}});
    return grpo_surrogate(in, 0.2);
  };
  EXPECT_NEAR(single(2.0, 1.0), 1.2, 1e-12);
  EXPECT_NEAR(single(2.0, -1.0), -1.2, 1e-12);
  EXPECT_NEAR(single(0.5, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(single(0.5, -1.0), -0.5, 1e-12);
  EXPECT_NEAR(single(1.1, 1.0), 1.1, 1e-12);
  SurrogateInputs empty;
  empty.trajectories.push_back({{0.1, 0.2}, {0, 0}, 1.0, {}});
  EXPECT_THROW(grpo_surrogate(empty, 0.2), Error);
}

TEST(Surrogate, MatchesScalarOracle) {
  std::mt19937 rng(29);
  std::normal_distribution<double> n(0, 0.4);
  for (int i = 0; i < 500; ++i) {
    SurrogateInputs in;
    in.beta_kl = (i % 3) * 0.01;
    const int g = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < g; ++k) {
      SurrogateTrajectory tr;
      const int len = 1 + static_cast<int>(rng() % 20);
      for (int t = 0; t < len; ++t) {
        tr.log_ratios.push_back(n(rng));
        tr.mask.push_back(rng() % 4 != 0);
        tr.kl.push_back(std::abs(n(rng)));
      }
      tr.mask[rng() % len] = 1;
      tr.advantage = n(rng) * 2;
      in.trajectories.push_back(tr);
    }
    EXPECT_NEAR(grpo_surrogate(in, 0.2), oracle_surrogate(in, 0.2), 1e-10);
  }
}
