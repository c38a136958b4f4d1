#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpagent/reward.hpp"
#include "vpagent/rollout.hpp"

namespace vpa {

struct CurationReport {
  long long input_count = 0;
  long long kept_count = 0;
  int k = 1;
  int min_passes = 1;
  int max_passes = 1;
  /// sample_id -> passes out of k.
  std::map<std::string, int> pass_counts;
  /// Why inputs were not kept; kept + sum(reasons) = input.
  std::map<std::string, long long> rejection_reasons;
};

Json to_json(const CurationReport& r);

struct RejectionResult {
  std::vector<Trajectory> kept;
  std::vector<RewardBreakdown> kept_rewards;
  CurationReport report;
};

/// One teacher trajectory per sample; keeps it iff acc = 1 and format = 1.
RejectionResult rejection_sample(std::span<const Sample> samples, const RolloutEngine& teacher,
                                 const JudgeClient& judge, const RewardConfig& reward, std::size_t concurrency = 1,
                                 const std::atomic<bool>* stop = nullptr);

struct PassBounds {
  int min_passes = 0;
  int max_passes = 0;
};

struct PassKResult {
  std::vector<Sample> kept;
  CurationReport report;
};

/// k rollouts per sample (rollout indexes 0..k-1), counting answers the
/// judge scores 1. Keeps samples with min <= passes <= max; bounds default
/// to (1, k-1). Throws ConfigError for invalid k or bounds.
PassKResult pass_k_filter(std::span<const Sample> samples, const RolloutEngine& policy, int k,
                          std::optional<PassBounds> bounds, const JudgeClient& judge, std::size_t concurrency = 1,
                          const std::atomic<bool>* stop = nullptr);

/// Conversation transcript for supervised fine-tuning: {"sample_id",
/// "teacher", "messages": [{"role", "content"}]}. Text-only turns carry a
/// string; media turns carry a list of {"type": "text"|"image", ...} parts
/// with frame sequences expanded into timestamped image refs.
Json sft_transcript(const Trajectory& trajectory, const AssetStore& assets, const std::string& teacher_model);

}  // namespace vpa
