#include "fixtures.hpp"

#include <cstdlib>
#include <random>

#include "vpagent/error.hpp"

#ifndef VPAGENT_TEST_DATA_DIR
#error "VPAGENT_TEST_DATA_DIR must be defined"
#endif

namespace vpa::test {

fs::path data_dir() { return VPAGENT_TEST_DATA_DIR; }

bool update_goldens() {
  const char* v = std::getenv("VPAGENT_UPDATE_GOLDEN");
  return v && std::string(v) == "1";
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  const auto name = "vpagent-test-" + std::to_string(rd()) + "-" + std::to_string(counter++);
  path_ = fs::temp_directory_path() / name;
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CwdGuard::CwdGuard(const fs::path& dir) : saved_(fs::current_path()) { fs::current_path(dir); }
CwdGuard::~CwdGuard() {
  std::error_code ec;
  fs::current_path(saved_, ec);
}

fs::path write_synthetic_video(const fs::path& dir, const std::string& name, double duration_s, int width, int height,
                               double fps) {
  const auto path = dir / (name + ".synth.json");
  write_file(path, SyntheticVideoBackend::make_manifest(width, height, fps, {{duration_s, Rgb{90, 120, 60}}}).dump());
  return path;
}

Sample make_sample(const std::string& id, const fs::path& video, const std::string& question, const std::string& answer,
                   std::optional<std::vector<std::string>> options) {
  Sample s;
  s.sample_id = id;
  s.video.path = video;
  s.question = question;
  s.answer = answer;
  s.options = std::move(options);
  s.source = "fixture";
  return s;
}

// Golden rollouts ------------------------------------------------------------

Trajectory golden_trajectory(const std::string& name, ToolBudget budget) {
  const CwdGuard cwd(data_dir());
  DefaultMediaBackend media;
  MemoryAssetStore assets;
  const ToolEnvironment env(media, assets, budget);
  ScriptedChatClient policy(Script::load(fs::path("scripts") / (name + ".json")));
  RolloutSettings settings;
  settings.temperature = 0;
  settings.clock = Clock::virtual_clock;
  const RolloutEngine engine(policy, env, settings);
  const auto samples = read_samples("samples/golden.jsonl");
  return engine.run_trajectory(samples.at(0));
}

std::string golden_record(const Trajectory& t) { return to_json(t).dump() + "\n"; }

fs::path golden_transcript_path(const std::string& name) {
  return data_dir() / "golden" / "transcripts" / (name + ".jsonl");
}

// Rendering fixture ----------------------------------------------------------

Image render_fixture_frame() {
  Image img(64, 48);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      img.set(x, y, Rgb{static_cast<std::uint8_t>(40 + 2 * x), static_cast<std::uint8_t>(60 + 3 * y), 150});
    }
  }
  return img;
}

Mask render_fixture_mask() {
  Mask m(64, 48);
  for (int y = 16; y < 25; ++y) {
    for (int x = 20; x < 31; ++x) {
      if (!(y < 19 && x > 26)) m.set(x, y);
    }
  }
  for (int y = 36; y < 39; ++y) {
    for (int x = 50; x < 53; ++x) m.set(x, y);
  }
  return m;
}

RenderStyle render_fixture_style() {
  RenderStyle s;
  s.stroke_px = 2;
  s.seed = 42;
  s.arrow_offset_px = 10;
  s.label_font_px = 12;
  return s;
}

fs::path golden_vp_path(VpType vp) {
  return data_dir() / "golden" / "vp" / (std::string(to_string(vp)) + ".ppm");
}

// Pipeline accounting --------------------------------------------------------

StageCounts corpus_stage_counts() { return {147245, {65594, 48457, 41083, 40929}}; }

void write_recorded_decisions(const fs::path& run_dir, const StageCounts& counts) {
  static const std::array<std::array<const char*, 2>, 4> reasons = {{{"filter_rejected", "unparseable_verdict"},
                                                                    {"verifier_rejected", "verifier_schema"},
                                                                    {"segmentation_empty", "mask_shape_mismatch"},
                                                                    {"no_renderable_frame", "rewrite_schema"}}};
  fs::create_directories(run_dir);
  long long entering = counts.initial;
  for (std::size_t k = 0; k < 4; ++k) {
    std::ofstream out(run_dir / ("stage" + std::to_string(k + 1) + ".jsonl"), std::ios::binary);
    for (long long i = 0; i < entering; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "corpus-%06lld", i);
      StageRecord r;
      r.sample_id = id;
      if (i < counts.kept[k]) {
        r.status = StageStatus::kept;
      } else {
        const bool secondary = (i - counts.kept[k]) % 10 == 9;
        r.status = secondary && k == 0 ? StageStatus::quarantined : StageStatus::rejected;
        r.reason = reasons[k][secondary ? 1 : 0];
      }
      out << to_json(r).dump() << '\n';
    }
    entering = counts.kept[k];
  }
}

// Curation -------------------------------------------------------------------

PassPattern pass_k_fixture(const fs::path& dir) {
  const auto video = write_synthetic_video(dir, "passk", 4);
  PassPattern p;
  const std::vector<std::pair<std::string, int>> pattern = {{"never", 0}, {"sometimes", 3}, {"always", 8}};
  for (const auto& [id, n] : pattern) {
    p.samples.push_back(make_sample(id, video, "Which colour fills the frame?", "C",
                                    std::vector<std::string>{"Red", "Blue", "Olive", "White"}));
    p.passes[id] = n;
  }
  return p;
}

std::unique_ptr<ChatClient> pass_pattern_policy(const PassPattern& p) {
  auto passes = p.passes;
  return std::make_unique<FunctionChatClient>([passes](const ChatRequest& req) {
    ChatResponse r;
    const bool pass = req.meta.rollout_index < passes.at(req.meta.sample_id);
    r.text = pass ? "<answer>C</answer>" : "<answer>A</answer>";
    return r;
  });
}

RejectionFixture rejection_fixture(const fs::path& dir) {
  const auto video = write_synthetic_video(dir, "teacher", 6);
  RejectionFixture f;
  const std::vector<std::string> options = {"Red", "Blue", "Olive", "White"};
  for (int i = 1; i <= 10; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "r%02d", i);
    f.samples.push_back(make_sample(id, video, "Which colour fills the frame?", "C", options));
  }
  f.samples[1].vp_frame = (data_dir() / "images" / "vp_frame.ppm").string();
  const auto step = [](const std::string& id, std::optional<int> round, const std::string& text) {
    Script::Step s;
    s.sample_id = id;
    s.round = round;
    s.respond = text;
    return s;
  };
  auto& t = f.teacher;
  t.role = "policy";
  t.steps.push_back(step("r01", std::nullopt, "<answer>C</answer>"));
  t.steps.push_back(step("r02", 0,
                         "<tool_call>{\"name\": \"view_visual_prompt\", \"arguments\": {\"path\": \"" +
                             *f.samples[1].vp_frame + "\"}}</tool_call>"));
  t.steps.push_back(step("r02", 1, "<answer>C</answer>"));
  t.steps.push_back(step("r03", 0, "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 1.0, \"end\": 3.0}}</tool_call>"));
  t.steps.push_back(step("r03", 1, "<answer>C. Olive</answer>"));
  t.steps.push_back(step("r04", std::nullopt, "<think>Olive everywhere.</think><answer>C</answer>"));
  t.steps.push_back(step("r05", std::nullopt, "<answer>C</answer>"));
  t.steps.push_back(step("r06", std::nullopt, "<answer>C</answer>"));
  t.steps.push_back(step("r07", std::nullopt, "<answer>olive green</answer>"));
  // correct answer after a tool call whose arguments violate the schema
  t.steps.push_back(step("r08", 0, "<tool_call>{\"name\": \"crop_video\", \"arguments\": {\"start\": 1.0}}</tool_call>"));
  t.steps.push_back(step("r08", 1, "<answer>C</answer>"));
  t.steps.push_back(step("r09", std::nullopt, "<answer>A</answer>"));
  t.steps.push_back(step("r10", std::nullopt, "<answer>B. Blue</answer>"));

  f.judge.role = "judge";
  f.judge.steps.push_back(step("r03", std::nullopt, "Verdict: correct"));
  f.judge.steps.push_back(step("r07", std::nullopt, "correct"));
  f.judge.steps.push_back(step("r09", std::nullopt, "incorrect"));
  f.judge.steps.push_back(step("r10", std::nullopt, "partially correct"));
  f.expected_kept = 7;
  f.expected_reasons = {{"malformed", 1}, {"incorrect", 2}};
  return f;
}

// Evaluation -----------------------------------------------------------------

EvalFixture eval_fixture(const fs::path& dir) {
  const auto video = write_synthetic_video(dir, "bench", 5);
  EvalFixture f;
  f.manifest.name = "two-dimension fixture";
  f.manifest.dimension_set = {"A", "B"};
  const std::vector<std::string> opts = {"A. Red", "B. Blue", "C. Green", "D. Yellow"};
  struct Row {
    const char* id;
    const char* dim;
    AnswerFormat format;
    const char* gold;
    const char* reply;
    const char* verdict;
  };
  const Row rows[] = {
      {"a1", "A", AnswerFormat::multiple_choice, "B", "B", nullptr},
      {"a2", "A", AnswerFormat::multiple_choice, "C", "C. Green", nullptr},
      {"a3", "A", AnswerFormat::multiple_choice, "D", "The answer is d", nullptr},
      {"a4", "A", AnswerFormat::multiple_choice, "B", "A", nullptr},
      {"b1", "B", AnswerFormat::multiple_choice, "A", "A.", nullptr},
      {"b2", "B", AnswerFormat::multiple_choice, "B. Blue", "(B)", nullptr},
      {"b3", "B", AnswerFormat::multiple_choice, "A", "C", nullptr},
      {"b4", "B", AnswerFormat::multiple_choice, "D", "Option D", nullptr},
      {"b5", "B", AnswerFormat::open_ended, "red umbrella", "a red umbrella", "correct"},
      {"b6", "B", AnswerFormat::open_ended, "green truck", "a blue car", "partially correct"},
  };
  f.policy.role = "policy";
  f.judge.role = "judge";
  for (const auto& r : rows) {
    ManifestItem item;
    item.sample = make_sample(r.id, video, "What colour is the object?", r.gold);
    if (r.format == AnswerFormat::multiple_choice) item.sample.options = opts;
    item.dimension = r.dim;
    item.answer_format = r.format;
    f.manifest.items.push_back(item);
    Script::Step s;
    s.sample_id = r.id;
    s.respond = std::string("<answer>") + r.reply + "</answer>";
    s.latency_ms = 100;
    f.policy.steps.push_back(s);
    if (r.verdict) {
      Script::Step j;
      j.sample_id = r.id;
      j.respond = r.verdict;
      f.judge.steps.push_back(j);
    }
  }
  return f;
}

BenchmarkManifest synthetic_manifest(const fs::path& video, int n) {
  BenchmarkManifest m;
  m.name = "synthetic-scale";
  m.dimension_set = kBenchmarkDimensions;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "item-%04d", i);
    ManifestItem item;
    const std::string gold(1, static_cast<char>('A' + i % 4));
    item.sample = make_sample(id, video, "Which option describes the target?", gold,
                              std::vector<std::string>{"A. one", "B. two", "C. three", "D. four"});
    item.dimension = kBenchmarkDimensions[static_cast<std::size_t>(i) % kBenchmarkDimensions.size()];
    m.items.push_back(std::move(item));
  }
  return m;
}

}  // namespace vpa::test
