#include "vpagent/curation.hpp"

#include <spdlog/spdlog.h>

#include "vpagent/error.hpp"

namespace vpa {

Json to_json(const CurationReport& r) {
  return {{"input_count", r.input_count},
          {"kept_count", r.kept_count},
          {"k", r.k},
          {"bounds", {{"min_passes", r.min_passes}, {"max_passes", r.max_passes}}},
          {"pass_counts", r.pass_counts},
          {"rejection_reasons", r.rejection_reasons}};
}

RejectionResult rejection_sample(std::span<const Sample> samples, const RolloutEngine& teacher,
                                 const JudgeClient& judge, const RewardConfig& reward, std::size_t concurrency,
                                 const std::atomic<bool>* stop) {
  struct Slot {
    std::optional<Trajectory> trajectory;
    RewardBreakdown reward;
    std::string reason;
  };
  std::vector<Slot> slots(samples.size());
  parallel_for(
      samples.size(), concurrency,
      [&](std::size_t i) {
        auto& slot = slots[i];
        try {
          auto tr = teacher.run_trajectory(samples[i]);
          if (tr.status == TrajectoryStatus::error) {
            slot.reason = "policy_unreachable";
          } else {
            slot.reward = score_trajectory(tr, samples[i].answer, samples[i].question, judge, reward);
            if (slot.reward.pending) slot.reason = "judge_unreachable";
            else if (slot.reward.acc != 1.0) slot.reason = "incorrect";
            else if (slot.reward.format != 1.0) slot.reason = "malformed";
          }
          slot.trajectory = std::move(tr);
        } catch (const std::exception& e) {
          spdlog::error("teacher rollout for '{}' failed: {}", samples[i].sample_id, e.what());
          slot.reason = "rollout_error";
        }
      },
      stop);

  RejectionResult out;
  out.report.k = 1;
  out.report.min_passes = 1;
  out.report.max_passes = 1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& slot = slots[i];
    if (!slot.trajectory && slot.reason.empty()) continue;  // never started (interrupted)
    ++out.report.input_count;
    const bool keep = slot.reason.empty();
    out.report.pass_counts[samples[i].sample_id] = keep ? 1 : 0;
    if (keep) {
      ++out.report.kept_count;
      out.kept.push_back(std::move(*slot.trajectory));
      out.kept_rewards.push_back(slot.reward);
    } else {
      ++out.report.rejection_reasons[slot.reason];
    }
  }
  return out;
}

PassKResult pass_k_filter(std::span<const Sample> samples, const RolloutEngine& policy, int k,
                          std::optional<PassBounds> bounds, const JudgeClient& judge, std::size_t concurrency,
                          const std::atomic<bool>* stop) {
  if (k < 1) throw Error(ErrorCode::ConfigError, "k must be >= 1");
  const auto b = bounds.value_or(PassBounds{1, k - 1});
  if (b.min_passes < 0 || b.min_passes > b.max_passes || b.max_passes > k) {
    throw Error(ErrorCode::ConfigError, "pass bounds must satisfy 0 <= min <= max <= k (got " +
                                            std::to_string(b.min_passes) + ", " + std::to_string(b.max_passes) +
                                            " with k=" + std::to_string(k) + ")");
  }

  const auto uk = static_cast<std::size_t>(k);
  // 0 = fail, 1 = pass, -1 = not run
  std::vector<int> outcome(samples.size() * uk, -1);
  parallel_for(
      outcome.size(), concurrency,
      [&](std::size_t idx) {
        const auto& sample = samples[idx / uk];
        const auto r = static_cast<int>(idx % uk);
        int pass = 0;
        try {
          const auto tr = policy.run_trajectory(sample, r);
          if (tr.status == TrajectoryStatus::answered && tr.final_answer) {
            pass = accuracy_reward(*tr.final_answer, sample.answer, judge, sample.question,
                                   RequestMeta{"judge", sample.sample_id, r, 0}) == 1.0;
          }
        } catch (const std::exception& e) {
          spdlog::warn("rollout {} of '{}' counted as a failure: {}", r, sample.sample_id, e.what());
        }
        outcome[idx] = pass;
      },
      stop);

  PassKResult out;
  out.report.k = k;
  out.report.min_passes = b.min_passes;
  out.report.max_passes = b.max_passes;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int passes = 0;
    bool complete = true;
    for (std::size_t r = 0; r < uk; ++r) {
      const int o = outcome[i * uk + r];
      if (o < 0) complete = false;
      else passes += o;
    }
    if (!complete) continue;
    ++out.report.input_count;
    out.report.pass_counts[samples[i].sample_id] = passes;
    if (passes < b.min_passes) {
      ++out.report.rejection_reasons["below_min_passes"];
    } else if (passes > b.max_passes) {
      ++out.report.rejection_reasons["above_max_passes"];
    } else {
      ++out.report.kept_count;
      out.kept.push_back(samples[i]);
    }
  }
  return out;
}

Json sft_transcript(const Trajectory& trajectory, const AssetStore& assets, const std::string& teacher_model) {
  Json messages = Json::array();
  for (const auto& m : trajectory.messages) {
    const bool text_only = std::all_of(m.parts.begin(), m.parts.end(),
                                       [](const ContentPart& p) { return p.kind == PartKind::text; });
    if (text_only) {
      messages.push_back({{"role", to_string(m.role)}, {"content", m.text()}});
      continue;
    }
    Json content = Json::array();
    for (const auto& p : m.parts) {
      switch (p.kind) {
        case PartKind::text:
          content.push_back({{"type", "text"}, {"text", p.payload}});
          break;
        case PartKind::image_ref: {
          Json part = {{"type", "image"}, {"image", p.payload}};
          if (p.timestamp) part["timestamp"] = *p.timestamp;
          content.push_back(std::move(part));
          break;
        }
        case PartKind::frame_sequence_ref:
          for (const auto& [ref, ts] : parse_sequence_document(assets.get_document(p.payload)).frames) {
            content.push_back({{"type", "text"}, {"text", frame_label(ts)}});
            content.push_back({{"type", "image"}, {"image", ref}, {"timestamp", ts}});
          }
          break;
      }
    }
    messages.push_back({{"role", to_string(m.role)}, {"content", std::move(content)}});
  }
  return {{"sample_id", trajectory.sample_id}, {"teacher", teacher_model}, {"messages", std::move(messages)}};
}

}  // namespace vpa
