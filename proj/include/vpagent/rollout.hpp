#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpagent/chat.hpp"
#include "vpagent/prompts.hpp"
#include "vpagent/reward.hpp"
#include "vpagent/sample.hpp"
#include "vpagent/tools.hpp"
#include "vpagent/trajectory.hpp"

namespace vpa {

/// wall: measured durations. virtual: generation time is the latency a
/// scripted backend declares and tool time is 0, so records stay
/// byte-identical across runs.
enum class Clock { wall, virtual_clock };

std::string_view to_string(Clock c);
Clock parse_clock(std::string_view s);

struct RolloutSettings {
  double temperature = 1.0;
  int max_response_tokens = 4096;
  /// false: one turn, no tool prompt, no tool execution.
  bool agent = true;
  Clock clock = Clock::wall;
};

/// Initial user message of a trajectory: the encoded video followed by the
/// question and either the tool prompt or the direct-answer instruction.
Message initial_message(const Sample& sample, const ToolEnvironment& env, const PromptLibrary& prompts,
                        bool agent);

struct RolloutGroup {
  std::string sample_id;
  std::vector<Trajectory> trajectories;
  std::vector<RewardBreakdown> rewards;
  std::vector<double> advantages;
};

/// Reward for the trajectory with the given rollout index.
using RewardFn = std::function<RewardBreakdown(const Trajectory&, int rollout_index)>;

struct BatchOptions {
  std::size_t concurrency = 1;
  /// When set, trajectories are checkpointed to <run_dir>/trajectories.jsonl.
  std::optional<fs::path> run_dir;
  /// Skip samples whose trajectory is already checkpointed.
  bool resume = false;
  const std::atomic<bool>* stop = nullptr;
};

struct BatchResult {
  /// Completed trajectories in input order (resumed ones included).
  std::vector<Trajectory> trajectories;
  std::size_t resumed = 0;
  bool interrupted = false;
};

/// The multi-turn loop between a policy endpoint and the tool environment.
class RolloutEngine {
 public:
  RolloutEngine(ChatClient& policy, const ToolEnvironment& env, RolloutSettings settings = {},
                const PromptLibrary& prompts = PromptLibrary::builtin());

  const RolloutSettings& settings() const { return settings_; }
  const ToolEnvironment& environment() const { return env_; }

  /// For t = 0..t_max: query the policy, record the turn, stop on an
  /// answer, otherwise execute the requested tools (only while t < t_max).
  /// An exhausted loop reports rounds_used = t_max + 1. An unreachable
  /// policy yields status error; other failures propagate.
  Trajectory run_trajectory(const Sample& sample, int rollout_index = 0) const;

  /// g independent rollouts scored by reward_fn with group-normalized
  /// advantages. Throws PolicyUnreachable only when every rollout failed
  /// that way.
  RolloutGroup run_group(const Sample& sample, int g, const RewardFn& reward_fn, std::size_t concurrency = 1) const;

  /// Bounded-parallel rollouts with ordered checkpointing and resume. Never
  /// aborts on a per-sample failure (recorded as status error).
  BatchResult run_batch(std::span<const Sample> samples, const BatchOptions& options) const;

 private:
  ChatClient& policy_;
  const ToolEnvironment& env_;
  RolloutSettings settings_;
  const PromptLibrary& prompts_;
};

/// {"sample_id", "rollout_index", "reward": {...}, "advantage"} per member.
std::vector<Json> reward_records(const RolloutGroup& group);

}  // namespace vpa
