#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpagent/chat.hpp"
#include "vpagent/prompts.hpp"
#include "vpagent/trajectory.hpp"

namespace vpa {

struct RewardBreakdown {
  double acc = 0;
  double format = 0;
  double parsimony = 0;
  double total = 0;
  /// Judge could not be reached; acc is provisional (0).
  bool pending = false;
  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

Json to_json(const RewardBreakdown& r);

/// What N counts in the parsimony term.
enum class ParsimonyCount { invocations, rounds };

/// Output schema checked by the format reward. The five base conditions
/// always apply; the flags add stricter variants.
struct FormatSchema {
  bool require_think_block = false;
};

struct RewardConfig {
  double alpha = 0.8;
  double beta = 0.15;
  double gamma = 0.05;
  double lambda = 0.1;
  ParsimonyCount count = ParsimonyCount::invocations;
  FormatSchema schema;
  /// Judge attempts per trajectory before the reward is left pending.
  int judge_attempts = 3;

  /// WeightSumViolation unless |alpha+beta+gamma-1| <= 1e-12; ConfigError for
  /// negative weights or lambda.
  void validate() const;
};

Json to_json(const RewardConfig& c);
RewardConfig reward_config_from_json(const Json& j);

enum class Verdict { correct, partially_correct, incorrect };

/// Case-insensitive scan for the literal verdict tokens. Returns nullopt
/// when none or more than one distinct verdict appears.
std::optional<Verdict> parse_verdict(std::string_view text);
double verdict_score(Verdict v);

/// Semantic answer comparison through a chat endpoint.
class JudgeClient {
 public:
  explicit JudgeClient(ChatClient& chat, const PromptLibrary& prompts = PromptLibrary::builtin(), int max_tokens = 64);

  /// Throws JudgeUnreachable / JudgeMalformedVerdict.
  Verdict judge(std::string_view question, std::string_view predicted, std::string_view gold,
                const RequestMeta& meta = {}) const;

 private:
  ChatClient& chat_;
  const PromptLibrary& prompts_;
  int max_tokens_;
};

/// {1, 0.5, 0}. Exact (trimmed) string equality returns 1 without a judge
/// call; a malformed verdict scores 0 with a warning; JudgeUnreachable
/// propagates.
double accuracy_reward(std::string_view predicted, std::string_view gold, const JudgeClient& judge,
                       std::string_view question = {}, const RequestMeta& meta = {});

/// 1 iff every assistant turn parses, every recorded tool call is a member
/// of the tool set with schema-valid arguments, exactly one non-empty
/// answer block exists, it sits in the final assistant turn, and the status
/// is answered (plus any stricter schema flags).
double format_reward(const Trajectory& trajectory, const FormatSchema& schema = {});

/// max(0, 1 - lambda * n)
double parsimony_reward(long long n_tool_calls, double lambda);

/// N for the parsimony term under the configured counting mode.
long long parsimony_count(const Trajectory& trajectory, ParsimonyCount mode);

/// alpha*acc + beta*format + gamma*par. Throws WeightSumViolation.
double integrated_reward(double acc, double format, double parsimony, const RewardConfig& cfg);

/// Full breakdown for one trajectory. The judge is retried up to
/// cfg.judge_attempts times; after that the breakdown is marked pending.
RewardBreakdown score_trajectory(const Trajectory& trajectory, std::string_view gold, std::string_view question,
                                 const JudgeClient& judge, const RewardConfig& cfg, int rollout_index = 0);

/// (r_i - mean) / population std; all zeros when the std is 0.
std::vector<double> group_advantages(std::span<const double> rewards);

struct SurrogateTrajectory {
  std::vector<double> log_ratios;
  std::vector<std::uint8_t> mask;
  double advantage = 0;
  /// Per-token KL estimates aligned with log_ratios; empty means 0.
  std::vector<double> kl;
};

struct SurrogateInputs {
  std::vector<SurrogateTrajectory> trajectories;
  double beta_kl = 0;
};

/// (1/G) sum_i (1/sum_t I) sum_{t: I=1} min(r, clip(r, 1-eps, 1+eps)) * A_i
///   - beta_kl * mean KL
/// where the KL mean uses the same masked per-trajectory then per-group
/// averaging. Throws EmptyMask when a trajectory's mask sums to 0.
double grpo_surrogate(const SurrogateInputs& inputs, double eps);

}  // namespace vpa
