#include "vpagent/rollout.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <set>

#include "vpagent/error.hpp"
#include "vpagent/response_parser.hpp"

namespace vpa {

std::string_view to_string(Clock c) { return c == Clock::wall ? "wall" : "virtual"; }

Clock parse_clock(std::string_view s) {
  if (s == "wall") return Clock::wall;
  if (s == "virtual") return Clock::virtual_clock;
  throw Error(ErrorCode::ConfigError, "clock must be 'wall' or 'virtual', got '" + std::string(s) + "'");
}

namespace {

using SteadyClock = std::chrono::steady_clock;

double elapsed_ms(SteadyClock::time_point since) {
  return std::chrono::duration<double, std::milli>(SteadyClock::now() - since).count();
}

std::string question_block(const Sample& sample, const PromptLibrary& prompts) {
  return trim(prompts.render("question", {{"question", sample.question}, {"options", format_options(sample.options)}}));
}

}  // namespace

Message initial_message(const Sample& sample, const ToolEnvironment& env, const PromptLibrary& prompts, bool agent) {
  std::vector<ContentPart> parts;
  parts.push_back(ContentPart::frames(env.encode_video_ref(sample.video)));
  if (agent) {
    const auto& b = env.budget();
    parts.push_back(ContentPart::text(question_block(sample, prompts) + "\n\n" +
                                      prompts.render("tool_prompt", {{"vp_path", sample.vp_frame.value_or("")},
                                                                     {"fps", format_decimal1(b.fps)},
                                                                     {"t_max", std::to_string(b.t_max)}})));
  } else {
    if (sample.vp_frame) {
      parts.push_back(
          ContentPart::image(env.assets().put_image(view_visual_prompt(*sample.vp_frame, env.budget().max_pixels))));
    }
    parts.push_back(ContentPart::text(question_block(sample, prompts) + "\n\n" + prompts.get("direct_answer")));
  }
  return Message::make(Role::user, std::move(parts));
}

RolloutEngine::RolloutEngine(ChatClient& policy, const ToolEnvironment& env, RolloutSettings settings,
                             const PromptLibrary& prompts)
    : policy_(policy), env_(env), settings_(settings), prompts_(prompts) {}

Trajectory RolloutEngine::run_trajectory(const Sample& input, int rollout_index) const {
  const auto& budget = env_.budget();
  Sample sample = input;
  resolve_video(sample, env_.media());
  Trajectory tr;
  tr.sample_id = sample.sample_id;
  tr.messages.push_back(initial_message(sample, env_, prompts_, settings_.agent));
  const ToolContext ctx{sample.video, sample.vp_frame.value_or("")};
  const bool wall = settings_.clock == Clock::wall;

  for (int t = 0; t <= budget.t_max; ++t) {
    ChatRequest req{tr.messages, settings_.temperature, settings_.max_response_tokens,
                    RequestMeta{"policy", sample.sample_id, rollout_index, t}};
    ChatResponse resp;
    const auto gen_start = SteadyClock::now();
    try {
      resp = policy_.complete(req);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ClientUnreachable) throw;
      spdlog::error("policy unreachable for '{}' (rollout {}): {}", sample.sample_id, rollout_index, e.detail());
      tr.status = TrajectoryStatus::error;
      tr.rounds_used = t;
      return tr;
    }
    tr.timing.generation_ms += wall ? elapsed_ms(gen_start) : resp.scripted_latency_ms;
    tr.timing.prompt_tokens += resp.prompt_tokens;
    tr.timing.completion_tokens += resp.completion_tokens;
    tr.messages.push_back(Message::text(Role::assistant, resp.text));

    if (!settings_.agent) {
      // Tool syntax is inert without tools; a bare reply is the answer.
      tr.final_answer = has_answer_block(resp.text) ? extract_answer(resp.text) : trim(resp.text);
      tr.status = TrajectoryStatus::answered;
      tr.rounds_used = t;
      return tr;
    }

    ResponseBlocks blocks;
    try {
      blocks = parse_response(resp.text, t);
    } catch (const ParseError& e) {
      if (has_answer_block(resp.text)) {
        tr.final_answer = extract_answer(resp.text);
        tr.status = TrajectoryStatus::answered;
        tr.rounds_used = t;
        return tr;
      }
      if (t < budget.t_max) tr.messages.push_back(Message::text(Role::tool, e.what()));
      continue;
    }

    tr.tool_history.insert(tr.tool_history.end(), blocks.tool_calls.begin(), blocks.tool_calls.end());
    if (blocks.answer) {
      tr.final_answer = *blocks.answer;
      tr.status = TrajectoryStatus::answered;
      tr.rounds_used = t;
      return tr;
    }
    if (!blocks.tool_calls.empty() && t < budget.t_max) {
      const auto tool_start = SteadyClock::now();
      auto results = env_.execute_tools(blocks.tool_calls, ctx);
      if (wall) tr.timing.tool_ms += elapsed_ms(tool_start);
      tr.timing.tool_calls_executed += static_cast<int>(results.size());
      for (auto& m : results) tr.messages.push_back(std::move(m));
    }
  }
  tr.status = TrajectoryStatus::exhausted;
  tr.rounds_used = budget.t_max + 1;
  return tr;
}

RolloutGroup RolloutEngine::run_group(const Sample& sample, int g, const RewardFn& reward_fn,
                                      std::size_t concurrency) const {
  if (g < 1) throw Error(ErrorCode::ConfigError, "group size must be >= 1");
  RolloutGroup group;
  group.sample_id = sample.sample_id;
  group.trajectories.resize(static_cast<std::size_t>(g));
  group.rewards.resize(static_cast<std::size_t>(g));
  parallel_for(static_cast<std::size_t>(g), concurrency, [&](std::size_t i) {
    group.trajectories[i] = run_trajectory(sample, static_cast<int>(i));
  });
  const bool all_failed = std::all_of(group.trajectories.begin(), group.trajectories.end(),
                                      [](const Trajectory& t) { return t.status == TrajectoryStatus::error; });
  if (all_failed) {
    throw Error(ErrorCode::PolicyUnreachable, "all " + std::to_string(g) + " rollouts of '" + sample.sample_id +
                                                  "' failed to reach the policy");
  }
  std::vector<double> totals(static_cast<std::size_t>(g));
  for (std::size_t i = 0; i < totals.size(); ++i) {
    group.rewards[i] = reward_fn(group.trajectories[i], static_cast<int>(i));
    totals[i] = group.rewards[i].total;
  }
  group.advantages = group_advantages(totals);
  return group;
}

BatchResult RolloutEngine::run_batch(std::span<const Sample> samples, const BatchOptions& options) const {
  if (options.concurrency < 1) throw Error(ErrorCode::ConfigError, "concurrency must be >= 1");
  BatchResult result;
  std::map<std::string, Trajectory> done;
  std::optional<fs::path> out_path;
  if (options.run_dir) {
    out_path = *options.run_dir / "trajectories.jsonl";
    if (fs::exists(*out_path) && fs::file_size(*out_path) > 0) {
      if (!options.resume) {
        throw Error(ErrorCode::ConfigError, out_path->string() + " already has records; use a fresh run_dir or resume");
      }
      for (const auto& j : read_jsonl(*out_path)) {
        auto tr = trajectory_from_json(j);
        done.emplace(tr.sample_id, std::move(tr));
      }
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!done.contains(samples[i].sample_id)) todo.push_back(i);
  }
  result.resumed = samples.size() - todo.size();
  if (result.resumed > 0) spdlog::info("resuming: {} of {} samples already done", result.resumed, samples.size());

  std::vector<std::optional<Trajectory>> fresh(todo.size());
  std::optional<OrderedJsonlWriter> writer;
  if (out_path) writer.emplace(*out_path, todo.size());
  parallel_for(
      todo.size(), options.concurrency,
      [&](std::size_t k) {
        const auto& sample = samples[todo[k]];
        Trajectory tr;
        try {
          tr = run_trajectory(sample);
        } catch (const std::exception& e) {
          spdlog::error("rollout of '{}' failed: {}", sample.sample_id, e.what());
          tr = Trajectory{};
          tr.sample_id = sample.sample_id;
          tr.status = TrajectoryStatus::error;
        }
        if (writer) writer->submit(k, to_json(tr));
        fresh[k] = std::move(tr);
      },
      options.stop);

  std::size_t k = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (auto it = done.find(samples[i].sample_id); it != done.end()) {
      result.trajectories.push_back(it->second);
    } else {
      if (fresh[k]) result.trajectories.push_back(std::move(*fresh[k]));
      else result.interrupted = true;
      ++k;
    }
  }
  return result;
}

std::vector<Json> reward_records(const RolloutGroup& group) {
  std::vector<Json> out;
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    out.push_back({{"sample_id", group.sample_id},
                   {"rollout_index", static_cast<int>(i)},
                   {"reward", to_json(group.rewards[i])},
                   {"advantage", group.advantages[i]}});
  }
  return out;
}

}  // namespace vpa
