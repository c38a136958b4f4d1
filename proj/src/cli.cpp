#include "vpagent/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <csignal>
#include <iostream>
#include <set>

#include "vpagent/config.hpp"
#include "vpagent/curation.hpp"
#include "vpagent/error.hpp"
#include "vpagent/eval.hpp"
#include "vpagent/pipeline.hpp"
#include "vpagent/rollout.hpp"
#include "vpagent/vp_render.hpp"

namespace vpa {

std::atomic<bool>& cli_stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitEnv = 2;
constexpr int kExitInterrupted = 130;

/// Counts transport failures so commands can tell an unreachable endpoint
/// from per-sample failures.
class TrackingClient final : public ChatClient {
 public:
  explicit TrackingClient(std::unique_ptr<ChatClient> inner) : inner_(std::move(inner)) {}
  ChatResponse complete(const ChatRequest& request) override {
    try {
      auto r = inner_->complete(request);
      ++ok_;
      return r;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ClientUnreachable) ++unreachable_;
      throw;
    }
  }
  bool never_reached() const { return unreachable_ > 0 && ok_ == 0; }

 private:
  std::unique_ptr<ChatClient> inner_;
  std::atomic<long long> ok_{0};
  std::atomic<long long> unreachable_{0};
};

struct Globals {
  std::string config_path;
  std::string run_dir;
  bool resume = false;
  long long concurrency = 0;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string log_level = "info";
};

struct Context {
  const Globals& g;
  std::ostream& out;

  RunConfig config() const {
    RunConfig c;
    if (!g.config_path.empty()) {
      c = load_run_config(g.config_path);
    } else {
      apply_env_overrides(c);
    }
    if (!g.run_dir.empty()) c.run_dir = g.run_dir;
    if (g.concurrency > 0) c.concurrency = static_cast<std::size_t>(g.concurrency);
    if (g.seed_opt && g.seed_opt->count() > 0) c.seed = g.seed;
    c.validate();
    return c;
  }

  fs::path run_dir(const RunConfig& c) const {
    if (c.run_dir.empty()) throw Error(ErrorCode::ConfigError, "no run directory (--run-dir or run_dir in the config)");
    return c.run_dir;
  }
};

void setup_logging(const std::string& level) {
  auto logger = spdlog::get("vpagent");
  if (!logger) {
    logger = spdlog::stderr_color_mt("vpagent");
    spdlog::set_default_logger(logger);
  }
  const auto lvl = spdlog::level::from_str(level);
  spdlog::set_level(lvl);
}

const Sample& find_sample(const std::vector<Sample>& samples, const std::string& id) {
  for (const auto& s : samples) {
    if (s.sample_id == id) return s;
  }
  throw Error(ErrorCode::ConfigError, "sample '" + id + "' is not in the dataset");
}

void print_status_counts(std::ostream& out, std::span<const Trajectory> trajectories) {
  std::map<std::string, long long> counts;
  for (const auto& t : trajectories) ++counts[std::string(to_string(t.status))];
  out << "trajectories: " << trajectories.size();
  for (const auto& [k, v] : counts) out << "  " << k << ": " << v;
  out << "\n";
}

void ensure_fresh(const fs::path& path, bool resume) {
  if (!resume && fs::exists(path) && fs::file_size(path) > 0) {
    throw Error(ErrorCode::ConfigError, path.string() + " already has records; use a fresh run_dir or --resume");
  }
}

// pipeline ------------------------------------------------------------------

struct PipelineArgs {
  std::string dataset;
  std::vector<int> stages = {1, 2, 3, 4};
  int stage = 4;
  std::string sample_id;
  std::string vp_dir = ".";
};

struct PipelineParts {
  RunConfig config;
  DefaultMediaBackend media;
  std::unique_ptr<AssetStore> assets;
  std::unique_ptr<ToolEnvironment> env;
  std::unique_ptr<ChatClient> filter;
  std::unique_ptr<ChatClient> verifier;
  std::unique_ptr<ChatClient> rewriter;
  std::unique_ptr<SegmentationClient> segmenter;
  std::unique_ptr<Pipeline> pipeline;

  PipelineParts(RunConfig c, std::unique_ptr<AssetStore> store, std::vector<int> stages)
      : config(std::move(c)), assets(std::move(store)) {
    env = std::make_unique<ToolEnvironment>(media, *assets, config.budget);
    filter = make_chat_client(config.endpoint("filter"), *assets);
    verifier = make_chat_client(config.endpoint("verifier"), *assets);
    segmenter = make_segmentation_client(config.endpoint("segmenter"));
    if (config.has_endpoint("rewriter")) rewriter = make_chat_client(config.endpoint("rewriter"), *assets);
    PipelineSettings s;
    s.seed = config.seed;
    s.concurrency = config.concurrency;
    s.style = config.style;
    s.max_response_tokens = config.max_response_tokens;
    s.stages = std::move(stages);
    s.stop = &cli_stop_flag();
    pipeline = std::make_unique<Pipeline>(
        PipelineClients{filter.get(), verifier.get(), segmenter.get(), rewriter.get()}, *env, s);
  }
};

int pipeline_run(const Context& ctx, const PipelineArgs& a) {
  auto cfg = ctx.config();
  const auto dir = ctx.run_dir(cfg);
  auto dataset = read_samples(a.dataset);
  write_config_snapshot(cfg, dir, ctx.g.resume);
  PipelineParts parts(cfg, std::make_unique<DirectoryAssetStore>(dir), a.stages);
  const auto result = parts.pipeline->run(std::move(dataset), dir, ctx.g.resume);
  ctx.out << result.ledger.table();
  if (result.interrupted) {
    spdlog::warn("interrupted; rerun with --resume to continue");
    return kExitInterrupted;
  }
  ctx.out << "final samples: " << result.final.size() << " (" << (dir / "final.jsonl").string() << ")\n";
  return kExitOk;
}

int pipeline_stage(const Context& ctx, const PipelineArgs& a) {
  if (a.stage < 1 || a.stage > 4) throw Error(ErrorCode::ConfigError, "--stage must be 1..4");
  auto cfg = ctx.config();
  const auto samples = read_samples(a.dataset);
  Sample s = find_sample(samples, a.sample_id);
  PipelineParts parts(cfg, std::make_unique<MemoryAssetStore>(), {1, 2, 3, 4});
  const auto& p = *parts.pipeline;
  Json report = {{"sample_id", s.sample_id}, {"stage", a.stage}};
  const auto finish = [&](int reached, const std::string& status, Json output) {
    report["reached_stage"] = reached;
    report["status"] = status;
    report["output"] = std::move(output);
    ctx.out << report.dump(2) << "\n";
    return kExitOk;
  };

  const auto decision = p.stage1_filter(s);
  Json d1 = {{"keep", decision.keep}};
  if (decision.reason) d1["reason"] = *decision.reason;
  if (!decision.keep) return finish(1, "rejected", d1);
  if (a.stage == 1) return finish(1, "kept", d1);

  resolve_video(s, parts.media);
  const auto record = p.stage2_verify(s);
  if (!record.is_valid) return finish(2, "rejected", to_json(record));
  if (a.stage == 2) return finish(2, "kept", to_json(record));

  const auto track = p.stage3_segment(s, record);
  if (!Pipeline::window_has_target(track, record, s.video.duration_s)) {
    return finish(3, "rejected", {{"reason", "segmentation_empty"}, {"track", to_json(track)}});
  }
  if (a.stage == 3) return finish(3, "kept", to_json(track));

  return finish(4, "kept", to_json(p.stage4_render(s, record, track, a.vp_dir)));
}

// rollout -------------------------------------------------------------------

struct RolloutArgs {
  std::string samples;
  std::string mode = "agent";
  std::string sample_id;
  int g = 0;
};

RolloutSettings rollout_settings(const RunConfig& cfg, bool agent) {
  RolloutSettings s;
  s.temperature = cfg.rollout_temperature;
  s.max_response_tokens = cfg.max_response_tokens;
  s.agent = agent;
  s.clock = cfg.clock;
  return s;
}

int rollout_run(const Context& ctx, const RolloutArgs& a) {
  auto cfg = ctx.config();
  const auto dir = ctx.run_dir(cfg);
  const auto samples = read_samples(a.samples);
  write_config_snapshot(cfg, dir, ctx.g.resume);
  DefaultMediaBackend media;
  DirectoryAssetStore assets(dir);
  ToolEnvironment env(media, assets, cfg.budget);
  TrackingClient policy(make_chat_client(cfg.endpoint("policy"), assets));
  const RolloutEngine engine(policy, env, rollout_settings(cfg, a.mode == "agent"));
  BatchOptions opts;
  opts.concurrency = cfg.concurrency;
  opts.run_dir = dir;
  opts.resume = ctx.g.resume;
  opts.stop = &cli_stop_flag();
  const auto result = engine.run_batch(samples, opts);
  print_status_counts(ctx.out, result.trajectories);
  if (policy.never_reached()) throw Error(ErrorCode::PolicyUnreachable, "no request reached the policy endpoint");
  return result.interrupted ? kExitInterrupted : kExitOk;
}

int rollout_group(const Context& ctx, const RolloutArgs& a) {
  auto cfg = ctx.config();
  const auto dir = ctx.run_dir(cfg);
  auto samples = read_samples(a.samples);
  if (!a.sample_id.empty()) samples = {find_sample(samples, a.sample_id)};
  const int g = a.g > 0 ? a.g : cfg.group_size;
  write_config_snapshot(cfg, dir, ctx.g.resume);

  const auto groups_path = dir / "groups.jsonl";
  const auto traj_path = dir / "group_trajectories.jsonl";
  ensure_fresh(groups_path, ctx.g.resume);
  std::set<std::string> done;
  if (fs::exists(groups_path)) {
    for (const auto& j : read_jsonl(groups_path)) done.insert(j.at("sample_id").get<std::string>());
  }

  DefaultMediaBackend media;
  DirectoryAssetStore assets(dir);
  ToolEnvironment env(media, assets, cfg.budget);
  auto policy = make_chat_client(cfg.endpoint("policy"), assets);
  auto judge_chat = make_chat_client(cfg.endpoint("judge"), assets);
  const JudgeClient judge(*judge_chat);
  const RolloutEngine engine(*policy, env, rollout_settings(cfg, true));

  char line[160];
  std::snprintf(line, sizeof line, "%-24s %7s %8s %8s %8s %10s\n", "sample_id", "rollout", "acc", "format", "reward",
                "advantage");
  ctx.out << line;
  for (const auto& s : samples) {
    if (cli_stop_flag()) return kExitInterrupted;
    if (done.contains(s.sample_id)) continue;
    const auto reward_fn = [&](const Trajectory& tr, int idx) {
      return score_trajectory(tr, s.answer, s.question, judge, cfg.reward, idx);
    };
    const auto group = engine.run_group(s, g, reward_fn, cfg.concurrency);
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      auto j = to_json(group.trajectories[i]);
      j["rollout_index"] = static_cast<int>(i);
      append_jsonl(traj_path, j);
    }
    for (const auto& r : reward_records(group)) append_jsonl(groups_path, r);
    for (std::size_t i = 0; i < group.rewards.size(); ++i) {
      const auto& r = group.rewards[i];
      std::snprintf(line, sizeof line, "%-24s %7zu %8.2f %8.2f %8.4f %10.4f\n", s.sample_id.c_str(), i, r.acc,
                    r.format, r.total, group.advantages[i]);
      ctx.out << line;
    }
  }
  return kExitOk;
}

// curation ------------------------------------------------------------------

struct CurateArgs {
  std::string samples;
  int k = 0;
  int min_passes = -1;
  int max_passes = -1;
};

void write_report(const Context& ctx, const fs::path& dir, const CurationReport& report) {
  write_file(dir / "curation_report.json", to_json(report).dump(2) + "\n");
  ctx.out << "input: " << report.input_count << "  kept: " << report.kept_count << "\n";
  for (const auto& [reason, n] : report.rejection_reasons) ctx.out << "  " << reason << ": " << n << "\n";
}

int curate_sft(const Context& ctx, const CurateArgs& a) {
  auto cfg = ctx.config();
  const auto dir = ctx.run_dir(cfg);
  const auto samples = read_samples(a.samples);
  ensure_fresh(dir / "sft.jsonl", false);
  write_config_snapshot(cfg, dir, false);
  DefaultMediaBackend media;
  DirectoryAssetStore assets(dir);
  ToolEnvironment env(media, assets, cfg.budget);
  TrackingClient teacher(make_chat_client(cfg.endpoint("policy"), assets));
  auto judge_chat = make_chat_client(cfg.endpoint("judge"), assets);
  const JudgeClient judge(*judge_chat);
  const RolloutEngine engine(teacher, env, rollout_settings(cfg, true));
  const auto result = rejection_sample(samples, engine, judge, cfg.reward, cfg.concurrency, &cli_stop_flag());
  std::vector<Json> transcripts;
  for (const auto& t : result.kept) transcripts.push_back(sft_transcript(t, assets, cfg.teacher_model));
  write_jsonl(dir / "sft.jsonl", transcripts);
  write_report(ctx, dir, result.report);
  if (teacher.never_reached()) throw Error(ErrorCode::PolicyUnreachable, "no request reached the teacher endpoint");
  return cli_stop_flag() ? kExitInterrupted : kExitOk;
}

int curate_rl(const Context& ctx, const CurateArgs& a) {
  auto cfg = ctx.config();
  const auto dir = ctx.run_dir(cfg);
  const auto samples = read_samples(a.samples);
  ensure_fresh(dir / "rl.jsonl", false);
  write_config_snapshot(cfg, dir, false);
  const int k = a.k > 0 ? a.k : cfg.pass_k;
  std::optional<PassBounds> bounds;
  if (a.min_passes >= 0 || a.max_passes >= 0 || cfg.min_passes || cfg.max_passes) {
    bounds = PassBounds{a.min_passes >= 0 ? a.min_passes : cfg.min_passes.value_or(1),
                        a.max_passes >= 0 ? a.max_passes : cfg.max_passes.value_or(k - 1)};
  }
  DefaultMediaBackend media;
  DirectoryAssetStore assets(dir);
  ToolEnvironment env(media, assets, cfg.budget);
  TrackingClient policy(make_chat_client(cfg.endpoint("policy"), assets));
  auto judge_chat = make_chat_client(cfg.endpoint("judge"), assets);
  const JudgeClient judge(*judge_chat);
  const RolloutEngine engine(policy, env, rollout_settings(cfg, true));
  const auto result = pass_k_filter(samples, engine, k, bounds, judge, cfg.concurrency, &cli_stop_flag());
  write_samples(dir / "rl.jsonl", result.kept);
  write_report(ctx, dir, result.report);
  if (policy.never_reached()) throw Error(ErrorCode::PolicyUnreachable, "no request reached the policy endpoint");
  return cli_stop_flag() ? kExitInterrupted : kExitOk;
}

// reward --------------------------------------------------------------------

struct RewardArgs {
  std::string trajectories;
  std::string samples;
  std::string out;
};

int reward_score(const Context& ctx, const RewardArgs& a) {
  auto cfg = ctx.config();
  std::map<std::string, Sample> by_id;
  for (auto& s : read_samples(a.samples)) by_id.emplace(s.sample_id, std::move(s));
  std::vector<Trajectory> trajectories;
  for (const auto& j : read_jsonl(a.trajectories)) {
    try {
      trajectories.push_back(trajectory_from_json(j));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("trajectory record: ") + e.what());
    }
  }
  MemoryAssetStore assets;
  auto judge_chat = make_chat_client(cfg.endpoint("judge"), assets);
  const JudgeClient judge(*judge_chat);

  std::map<std::string, int> next_index;
  std::vector<int> index(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) index[i] = next_index[trajectories[i].sample_id]++;
  std::vector<RewardBreakdown> rewards(trajectories.size());
  for (const auto& t : trajectories) {
    if (!by_id.contains(t.sample_id)) {
      throw Error(ErrorCode::SchemaViolation, "no sample record for trajectory '" + t.sample_id + "'");
    }
  }
  parallel_for(trajectories.size(), cfg.concurrency, [&](std::size_t i) {
    const auto& s = by_id.at(trajectories[i].sample_id);
    rewards[i] = score_trajectory(trajectories[i], s.answer, s.question, judge, cfg.reward, index[i]);
  });

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < trajectories.size(); ++i) groups[trajectories[i].sample_id].push_back(i);
  std::vector<double> advantage(trajectories.size(), 0.0);
  for (const auto& [_, members] : groups) {
    std::vector<double> totals;
    for (auto i : members) totals.push_back(rewards[i].total);
    const auto adv = group_advantages(totals);
    for (std::size_t m = 0; m < members.size(); ++m) advantage[members[m]] = adv[m];
  }
  std::vector<Json> records;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    records.push_back({{"sample_id", trajectories[i].sample_id},
                       {"rollout_index", index[i]},
                       {"reward", to_json(rewards[i])},
                       {"advantage", advantage[i]}});
  }
  if (a.out.empty()) {
    for (const auto& r : records) ctx.out << r.dump() << "\n";
  } else {
    write_jsonl(a.out, records);
  }
  return kExitOk;
}

// render --------------------------------------------------------------------

struct RenderArgs {
  std::string mask;
  std::string frame;
  std::string type;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  int mark = 1;
  std::string out;
};

int render_vp(const Context& ctx, const RenderArgs& a) {
  auto cfg = ctx.config();
  const auto vp = parse_vp_type(a.type);
  if (!vp) throw Error(ErrorCode::ConfigError, "unknown visual prompt type '" + a.type + "'");
  Mask mask(0, 0);
  try {
    mask = rle_decode(Json::parse(read_file(a.mask)));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, a.mask + ": " + e.what());
  }
  const auto frame = read_image(a.frame);
  auto style = cfg.style;
  style.seed = a.seed_opt->count() > 0 ? a.seed : cfg.seed;
  write_image(a.out, render_prompt(frame, mask, *vp, style, a.mark));
  ctx.out << "wrote " << a.out << "\n";
  return kExitOk;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string mode = "agent";
  double temperature = 0;
  double threshold = -1;
  std::string aggregation;
};

int eval_run(const Context& ctx, const EvalArgs& a) {
  if (a.temperature != 0.0) {
    throw Error(ErrorCode::ConfigError, "evaluation runs at temperature 0; --temperature " +
                                            format_decimal1(a.temperature) + " is not allowed");
  }
  auto cfg = ctx.config();
  if (a.threshold >= 0) cfg.oe_threshold = a.threshold;
  if (!a.aggregation.empty()) cfg.aggregation = a.aggregation == "macro" ? Aggregation::macro : Aggregation::micro;
  cfg.validate();
  const auto manifest = load_manifest(a.manifest);

  std::optional<fs::path> dir;
  if (!cfg.run_dir.empty()) {
    dir = cfg.run_dir;
    write_config_snapshot(cfg, *dir, ctx.g.resume);
  }
  DefaultMediaBackend media;
  std::unique_ptr<AssetStore> assets;
  if (dir) assets = std::make_unique<DirectoryAssetStore>(*dir);
  else assets = std::make_unique<MemoryAssetStore>();
  ToolEnvironment env(media, *assets, cfg.budget);
  TrackingClient policy(make_chat_client(cfg.endpoint("policy"), *assets));
  auto judge_chat = make_chat_client(cfg.endpoint("judge"), *assets);
  const JudgeClient judge(*judge_chat);

  EvalOptions opts;
  opts.agent = a.mode == "agent";
  opts.max_response_tokens = cfg.max_response_tokens;
  opts.oe_threshold = cfg.oe_threshold;
  opts.aggregation = cfg.aggregation;
  opts.concurrency = cfg.concurrency;
  opts.clock = cfg.clock;
  opts.run_dir = dir;
  opts.resume = ctx.g.resume;
  const auto report = evaluate(manifest, policy, env, judge, opts);
  if (policy.never_reached()) throw Error(ErrorCode::PolicyUnreachable, "no request reached the policy endpoint");
  ctx.out << report.table();
  if (dir) {
    write_file(*dir / "eval_report.json", to_json(report).dump(2) + "\n");
    write_file(*dir / "eval_report.txt", report.table());
  }
  return kExitOk;
}

// report --------------------------------------------------------------------

struct ReportArgs {
  std::string trajectories;
  bool json = false;
};

int report_latency(const Context& ctx, const ReportArgs& a) {
  std::vector<Trajectory> trajectories;
  for (const auto& j : read_jsonl(a.trajectories)) {
    try {
      trajectories.push_back(trajectory_from_json(j));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("trajectory record: ") + e.what());
    }
  }
  const auto summary = latency_report(trajectories);
  ctx.out << (a.json ? to_json(summary).dump(2) + "\n" : latency_table(summary));
  return kExitOk;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Agentic video-QA toolkit: data pipeline, rollouts, rewards, curation, rendering and evaluation.",
               "vpagent"};
  app.require_subcommand(1);
  app.footer(
      "Environment: VPAGENT_<ROLE>_URL and VPAGENT_<ROLE>_API_KEY override endpoint entries "
      "(roles: policy, judge, filter, verifier, segmenter, rewriter); VPAGENT_ASSET_DIR overrides the prompt "
      "template directory.\nExit codes: 0 success, 1 user/config error, 2 environment error, 130 interrupted.");

  Globals g;
  app.add_option("-c,--config", g.config_path, "Run configuration (JSON)");
  app.add_option("--run-dir", g.run_dir, "Run directory (overrides run_dir in the config)");
  app.add_flag("--resume", g.resume, "Continue a previous run in the same run directory");
  app.add_option("--concurrency", g.concurrency, "Parallel requests (overrides the config)");
  g.seed_opt = app.add_option("--seed", g.seed, "Run seed (overrides the config)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  const Context ctx{g, out};
  std::function<int()> action;
  const auto sub = [](CLI::App* parent, const std::string& name, const std::string& desc) {
    auto* s = parent->add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };

  PipelineArgs pa;
  auto* pipeline = sub(&app, "pipeline", "Four-stage data synthesis");
  pipeline->require_subcommand(1);
  auto* p_run = sub(pipeline, "run", "Run G1..G4 over a dataset into the run directory");
  p_run->add_option("--dataset", pa.dataset, "Sample records (JSONL)")->required();
  p_run->add_option("--stages", pa.stages, "Stages to run (must be 1 2 3 4)")->delimiter(',');
  p_run->callback([&] { action = [&] { return pipeline_run(ctx, pa); }; });
  auto* p_stage = sub(pipeline, "stage", "Run stages 1..k for one sample and print the stage-k output");
  p_stage->add_option("--dataset", pa.dataset, "Sample records (JSONL)")->required();
  p_stage->add_option("--sample-id", pa.sample_id, "Sample to process")->required();
  p_stage->add_option("--stage", pa.stage, "Last stage to run (1..4)")->required();
  p_stage->add_option("--vp-dir", pa.vp_dir, "Where stage 4 writes the prompt frame");
  p_stage->callback([&] { action = [&] { return pipeline_stage(ctx, pa); }; });

  RolloutArgs ra;
  auto* rollout = sub(&app, "rollout", "Multi-turn tool-using rollouts");
  rollout->require_subcommand(1);
  auto* r_run = sub(rollout, "run", "One trajectory per sample into <run_dir>/trajectories.jsonl");
  r_run->add_option("--samples", ra.samples, "Sample records (JSONL)")->required();
  r_run->add_option("--mode", ra.mode, "agent or direct")->check(CLI::IsMember({"agent", "direct"}));
  r_run->callback([&] { action = [&] { return rollout_run(ctx, ra); }; });
  auto* r_group = sub(rollout, "group", "G scored rollouts per sample with group-normalized advantages");
  r_group->add_option("--samples", ra.samples, "Sample records (JSONL)")->required();
  r_group->add_option("--sample-id", ra.sample_id, "Only this sample");
  r_group->add_option("-g,--group-size", ra.g, "Rollouts per sample (default from config)");
  r_group->callback([&] { action = [&] { return rollout_group(ctx, ra); }; });

  CurateArgs ca;
  auto* curate = sub(&app, "curate", "Training-data curation");
  curate->require_subcommand(1);
  auto* c_sft = sub(curate, "sft", "Rejection sampling of teacher trajectories into <run_dir>/sft.jsonl");
  c_sft->add_option("--samples", ca.samples, "Sample records (JSONL)")->required();
  c_sft->callback([&] { action = [&] { return curate_sft(ctx, ca); }; });
  auto* c_rl = sub(curate, "rl", "Pass-k difficulty filter into <run_dir>/rl.jsonl");
  c_rl->add_option("--samples", ca.samples, "Sample records (JSONL)")->required();
  c_rl->add_option("-k", ca.k, "Rollouts per sample (default from config)");
  c_rl->add_option("--min-passes", ca.min_passes, "Lower pass bound (default 1)");
  c_rl->add_option("--max-passes", ca.max_passes, "Upper pass bound (default k-1)");
  c_rl->callback([&] { action = [&] { return curate_rl(ctx, ca); }; });

  RewardArgs wa;
  auto* reward = sub(&app, "reward", "Reward computation");
  reward->require_subcommand(1);
  auto* w_score = sub(reward, "score", "Score trajectory records against their samples");
  w_score->add_option("--trajectories", wa.trajectories, "Trajectory records (JSONL)")->required();
  w_score->add_option("--samples", wa.samples, "Sample records with gold answers (JSONL)")->required();
  w_score->add_option("--out", wa.out, "Output JSONL (default stdout)");
  w_score->callback([&] { action = [&] { return reward_score(ctx, wa); }; });

  RenderArgs va;
  auto* render = sub(&app, "render", "Visual prompt rendering");
  render->require_subcommand(1);
  auto* v_vp = sub(render, "vp", "Draw one visual prompt on a frame");
  v_vp->add_option("--mask", va.mask, "RLE mask (JSON)")->required();
  v_vp->add_option("--frame", va.frame, "Frame image")->required();
  v_vp->add_option("--type", va.type, "rectangle, mask_contour, ellipse, triangle, scribble, point, arrow, set_of_mark")
      ->required();
  va.seed_opt = v_vp->add_option("--seed", va.seed, "Seed for the scribble walk");
  v_vp->add_option("--mark", va.mark, "Set-of-mark number");
  v_vp->add_option("--out", va.out, "Output image")->required();
  v_vp->callback([&] { action = [&] { return render_vp(ctx, va); }; });

  EvalArgs ea;
  auto* eval = sub(&app, "eval", "Benchmark evaluation");
  eval->require_subcommand(1);
  auto* e_run = sub(eval, "run", "Evaluate a manifest; prints the per-dimension table");
  e_run->add_option("--manifest", ea.manifest, "Benchmark manifest (JSONL)")->required();
  e_run->add_option("--mode", ea.mode, "agent or direct")->check(CLI::IsMember({"agent", "direct"}));
  e_run->add_option("--temperature", ea.temperature, "Must be 0");
  e_run->add_option("--threshold", ea.threshold, "Judge score counted correct for open-ended items");
  e_run->add_option("--aggregation", ea.aggregation, "micro or macro")->check(CLI::IsMember({"micro", "macro"}));
  e_run->callback([&] { action = [&] { return eval_run(ctx, ea); }; });

  ReportArgs pa2;
  auto* report = sub(&app, "report", "Reports over recorded trajectories");
  report->require_subcommand(1);
  auto* l_lat = sub(report, "latency", "Mean/median generation time, tool time and action steps");
  l_lat->add_option("--trajectories", pa2.trajectories, "Trajectory records (JSONL)")->required();
  l_lat->add_flag("--json", pa2.json, "Print JSON instead of a table");
  l_lat->callback([&] { action = [&] { return report_latency(ctx, pa2); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUser;
  }

  setup_logging(g.log_level);
  try {
    return action ? action() : kExitUser;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_environment_error(e.code()) ? kExitEnv : kExitUser;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitEnv;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  }
}

int cli_dispatch(int argc, const char* const* argv) {
  std::signal(SIGINT, [](int) { cli_stop_flag() = true; });
  return cli_dispatch(argc, argv, std::cout, std::cerr);
}

}  // namespace vpa
