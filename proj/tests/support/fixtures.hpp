#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vpagent/curation.hpp"
#include "vpagent/eval.hpp"
#include "vpagent/mask.hpp"
#include "vpagent/pipeline.hpp"
#include "vpagent/rollout.hpp"

namespace vpa::test {

/// Checked-in fixture root (tests/data).
fs::path data_dir();

/// VPAGENT_UPDATE_GOLDEN=1 rewrites golden files instead of comparing.
bool update_goldens();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

class CwdGuard {
 public:
  explicit CwdGuard(const fs::path& dir);
  ~CwdGuard();
  CwdGuard(const CwdGuard&) = delete;
  CwdGuard& operator=(const CwdGuard&) = delete;

 private:
  fs::path saved_;
};

/// Solid-colour synthetic video manifest `<dir>/<name>.synth.json`.
fs::path write_synthetic_video(const fs::path& dir, const std::string& name, double duration_s, int width = 64,
                               int height = 36, double fps = 30);

Sample make_sample(const std::string& id, const fs::path& video, const std::string& question,
                   const std::string& answer, std::optional<std::vector<std::string>> options = std::nullopt);

// Golden rollouts ------------------------------------------------------------

inline const std::vector<std::string> kGoldenScripts = {"answer_at_0", "two_tool_then_answer", "never_answer"};

/// Replays tests/data/scripts/<name>.json against the golden sample with a
/// virtual clock (cwd switched to tests/data so recorded paths are relative).
Trajectory golden_trajectory(const std::string& name, ToolBudget budget = {});
/// Single-line trajectory record plus newline.
std::string golden_record(const Trajectory& t);
fs::path golden_transcript_path(const std::string& name);

// Rendering fixture ----------------------------------------------------------

Image render_fixture_frame();
/// Two components: an 11x9 blob with a notch and a 3x3 square.
Mask render_fixture_mask();
RenderStyle render_fixture_style();
fs::path golden_vp_path(VpType vp);

// Pipeline accounting --------------------------------------------------------

struct StageCounts {
  long long initial;
  std::array<long long, 4> kept;
};

/// The retention counts of the published corpus run.
StageCounts corpus_stage_counts();

/// Writes stage1..4.jsonl under run_dir with one status record per sample
/// reproducing `counts`; rejection reasons are spread over each stage's
/// categories deterministically.
void write_recorded_decisions(const fs::path& run_dir, const StageCounts& counts);

// Curation -------------------------------------------------------------------

/// Policy whose rollout r of sample s answers correctly iff r < passes[s].
struct PassPattern {
  std::vector<Sample> samples;
  std::map<std::string, int> passes;
};
PassPattern pass_k_fixture(const fs::path& dir);
std::unique_ptr<ChatClient> pass_pattern_policy(const PassPattern& p);

/// 10 samples; the teacher answers 8 correctly, one of them after a
/// schema-invalid tool call, and misses two (one partial credit).
struct RejectionFixture {
  std::vector<Sample> samples;
  Script teacher;
  Script judge;
  long long expected_kept;
  std::map<std::string, long long> expected_reasons;
};
RejectionFixture rejection_fixture(const fs::path& dir);

// Evaluation -----------------------------------------------------------------

/// 10 items: dimension A has 4 (3 correct), dimension B has 6 (4 correct);
/// two of the B items are open-ended and judged.
struct EvalFixture {
  BenchmarkManifest manifest;
  Script policy;
  Script judge;
};
EvalFixture eval_fixture(const fs::path& dir);

/// `n` items spread round-robin across the twelve benchmark dimensions.
BenchmarkManifest synthetic_manifest(const fs::path& video, int n);
inline const std::vector<std::string> kBenchmarkDimensions = {"OA", "HA", "OD", "FM", "CR", "PU",
                                                              "CI", "FT", "RT", "AS", "SR", "GC"};

}  // namespace vpa::test
