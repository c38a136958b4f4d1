#include "vpagent/reward.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "vpagent/error.hpp"
#include "vpagent/response_parser.hpp"

namespace vpa {

Json to_json(const RewardBreakdown& r) {
  Json j = {{"acc", r.acc}, {"format", r.format}, {"parsimony", r.parsimony}, {"total", r.total}};
  if (r.pending) j["pending"] = true;
  return j;
}

void RewardConfig::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) throw Error(ErrorCode::ConfigError, "reward weights must be >= 0");
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-12) {
    throw Error(ErrorCode::WeightSumViolation, "alpha + beta + gamma = " + std::to_string(alpha + beta + gamma));
  }
  if (!(lambda >= 0)) throw Error(ErrorCode::ConfigError, "lambda must be >= 0");
  if (judge_attempts < 1) throw Error(ErrorCode::ConfigError, "judge_attempts must be >= 1");
}

Json to_json(const RewardConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"gamma", c.gamma},
          {"lambda", c.lambda},
          {"parsimony_count", c.count == ParsimonyCount::invocations ? "invocations" : "rounds"},
          {"format_schema", {{"require_think_block", c.schema.require_think_block}}},
          {"judge_attempts", c.judge_attempts}};
}

RewardConfig reward_config_from_json(const Json& j) {
  RewardConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.gamma = j.value("gamma", c.gamma);
  c.lambda = j.value("lambda", c.lambda);
  const auto mode = j.value("parsimony_count", std::string("invocations"));
  if (mode == "rounds") c.count = ParsimonyCount::rounds;
  else if (mode != "invocations") throw Error(ErrorCode::ConfigError, "parsimony_count must be invocations|rounds");
  if (j.contains("format_schema")) {
    c.schema.require_think_block = j["format_schema"].value("require_think_block", false);
  }
  c.judge_attempts = j.value("judge_attempts", c.judge_attempts);
  c.validate();
  return c;
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  const auto lower = to_lower(text);
  std::vector<std::string> words;
  std::string cur;
  for (char c : lower) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));

  std::set<Verdict> seen;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "partially" && i + 1 < words.size() && words[i + 1] == "correct") {
      seen.insert(Verdict::partially_correct);
      ++i;
    } else if (words[i] == "incorrect") {
      seen.insert(Verdict::incorrect);
    } else if (words[i] == "correct") {
      seen.insert(Verdict::correct);
    }
  }
  if (seen.size() != 1) return std::nullopt;
  return *seen.begin();
}

double verdict_score(Verdict v) {
  switch (v) {
    case Verdict::correct: return 1.0;
    case Verdict::partially_correct: return 0.5;
    case Verdict::incorrect: return 0.0;
  }
  return 0.0;
}

JudgeClient::JudgeClient(ChatClient& chat, const PromptLibrary& prompts, int max_tokens)
    : chat_(chat), prompts_(prompts), max_tokens_(max_tokens) {}

Verdict JudgeClient::judge(std::string_view question, std::string_view predicted, std::string_view gold,
                           const RequestMeta& meta) const {
  ChatRequest req;
  req.temperature = 0;
  req.max_tokens = max_tokens_;
  req.meta = meta;
  req.meta.role = "judge";
  req.messages.push_back(Message::text(Role::system, prompts_.get("judge.system")));
  req.messages.push_back(Message::text(
      Role::user, prompts_.render("judge.user", {{"question", std::string(question)},
                                                 {"gold", std::string(gold)},
                                                 {"predicted", std::string(predicted)}})));
  ChatResponse resp;
  try {
    resp = chat_.complete(req);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ClientUnreachable) throw Error(ErrorCode::JudgeUnreachable, e.detail());
    throw;
  }
  auto v = parse_verdict(resp.text);
  if (!v) throw Error(ErrorCode::JudgeMalformedVerdict, "'" + resp.text.substr(0, 120) + "'");
  return *v;
}

double accuracy_reward(std::string_view predicted, std::string_view gold, const JudgeClient& judge,
                       std::string_view question, const RequestMeta& meta) {
  if (trim(predicted) == trim(gold)) return 1.0;
  try {
    return verdict_score(judge.judge(question, predicted, gold, meta));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::JudgeMalformedVerdict) throw;
    spdlog::warn("judge verdict unusable for '{}': {}", meta.sample_id, e.what());
    return 0.0;
  }
}

double format_reward(const Trajectory& trajectory, const FormatSchema& schema) {
  if (trajectory.status != TrajectoryStatus::answered) return 0.0;
  const auto turns = trajectory.assistant_turns();
  if (turns.empty()) return 0.0;

  int answers = 0;
  bool answer_in_final = false;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto text = turns[i]->text();
    ResponseBlocks blocks;
    try {
      blocks = parse_response(text);
    } catch (const Error&) {
      return 0.0;
    }
    if (schema.require_think_block && text.find("<think>") == std::string::npos) return 0.0;
    if (blocks.answer) {
      if (blocks.answer->empty()) return 0.0;
      ++answers;
      answer_in_final = i + 1 == turns.size();
    }
  }
  for (const auto& call : trajectory.tool_history) {
    if (!argument_schema_violation(call.function, call.arguments).empty()) return 0.0;
  }
  return answers == 1 && answer_in_final ? 1.0 : 0.0;
}

double parsimony_reward(long long n_tool_calls, double lambda) {
  return std::max(0.0, 1.0 - lambda * static_cast<double>(n_tool_calls));
}

long long parsimony_count(const Trajectory& trajectory, ParsimonyCount mode) {
  if (mode == ParsimonyCount::invocations) return static_cast<long long>(trajectory.tool_history.size());
  std::set<int> rounds;
  for (const auto& c : trajectory.tool_history) rounds.insert(c.round_index);
  return static_cast<long long>(rounds.size());
}

double integrated_reward(double acc, double format, double parsimony, const RewardConfig& cfg) {
  if (std::abs(cfg.alpha + cfg.beta + cfg.gamma - 1.0) > 1e-12) {
    throw Error(ErrorCode::WeightSumViolation,
                "alpha + beta + gamma = " + std::to_string(cfg.alpha + cfg.beta + cfg.gamma));
  }
  return cfg.alpha * acc + cfg.beta * format + cfg.gamma * parsimony;
}

RewardBreakdown score_trajectory(const Trajectory& trajectory, std::string_view gold, std::string_view question,
                                 const JudgeClient& judge, const RewardConfig& cfg, int rollout_index) {
  RewardBreakdown r;
  r.format = format_reward(trajectory, cfg.schema);
  r.parsimony = parsimony_reward(parsimony_count(trajectory, cfg.count), cfg.lambda);
  if (trajectory.final_answer) {
    const RequestMeta meta{"judge", trajectory.sample_id, rollout_index, 0};
    for (int attempt = 1; attempt <= cfg.judge_attempts; ++attempt) {
      try {
        r.acc = accuracy_reward(*trajectory.final_answer, gold, judge, question, meta);
        r.pending = false;
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::JudgeUnreachable) throw;
        spdlog::warn("judge unreachable for '{}' (attempt {}/{})", trajectory.sample_id, attempt, cfg.judge_attempts);
        r.pending = true;
      }
    }
  }
  r.total = integrated_reward(r.acc, r.format, r.parsimony, cfg);
  return r;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  const auto n = static_cast<double>(rewards.size());
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  // Groups whose rewards agree to rounding noise carry no learning signal.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

double grpo_surrogate(const SurrogateInputs& inputs, double eps) {
  if (!(eps > 0)) throw Error(ErrorCode::InvalidArguments, "eps must be positive");
  if (inputs.trajectories.empty()) throw Error(ErrorCode::EmptyMask, "no trajectories");
  double policy_term = 0;
  double kl_term = 0;
  for (std::size_t i = 0; i < inputs.trajectories.size(); ++i) {
    const auto& tr = inputs.trajectories[i];
    if (tr.mask.size() != tr.log_ratios.size() || (!tr.kl.empty() && tr.kl.size() != tr.log_ratios.size())) {
      throw Error(ErrorCode::DimensionMismatch, "trajectory " + std::to_string(i) + " has misaligned token arrays");
    }
    double masked = 0;
    double sum = 0;
    double kl_sum = 0;
    for (std::size_t t = 0; t < tr.log_ratios.size(); ++t) {
      if (!tr.mask[t]) continue;
      const double r = std::exp(tr.log_ratios[t]);
      if (!std::isfinite(r)) throw Error(ErrorCode::InvalidArguments, "non-finite ratio");
      const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);
      sum += std::min(r, clipped) * tr.advantage;
      if (!tr.kl.empty()) kl_sum += tr.kl[t];
      masked += 1;
    }
    if (masked == 0) throw Error(ErrorCode::EmptyMask, "trajectory " + std::to_string(i) + " has an empty mask");
    policy_term += sum / masked;
    kl_term += kl_sum / masked;
  }
  const auto g = static_cast<double>(inputs.trajectories.size());
  return policy_term / g - inputs.beta_kl * (kl_term / g);
}

}  // namespace vpa
