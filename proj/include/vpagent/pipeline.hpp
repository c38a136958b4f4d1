#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpagent/chat.hpp"
#include "vpagent/mask.hpp"
#include "vpagent/prompts.hpp"
#include "vpagent/sample.hpp"
#include "vpagent/tools.hpp"
#include "vpagent/vp_render.hpp"

namespace vpa {

struct FilterDecision {
  bool keep = false;
  std::optional<std::string> reason;
};

struct VerificationRecord {
  bool is_valid = false;
  std::optional<std::string> reason;
  std::string target_description;
  std::string tag;
  double start_s = 0;
  double end_s = 0;
  std::string rewritten_question;
  std::optional<std::vector<std::string>> rewritten_options;
  std::string rewritten_answer;
  std::string vp_type;

  /// SchemaViolation unless: invalid records carry a reason; valid records
  /// have exactly one <vp> in the question, start < end, a 3-10 word tag
  /// and a known vp type.
  void validate() const;
};

Json to_json(const VerificationRecord& r);
VerificationRecord verification_record_from_json(const Json& j);
/// Reads the verifier's output object (timestamp.start/end,
/// visual_prompt_type), filling answer/options from the sample when
/// absent, rounding the window to one decimal, and validating.
VerificationRecord parse_verifier_output(const Json& j, const Sample& sample);

struct MaskTrack {
  std::string tag;
  Size frame_size;
  std::map<int, Mask> masks;
};

/// {"tag", "frame_size": {"w", "h"}, "masks": {"<second>": RLE}}
Json to_json(const MaskTrack& t);
MaskTrack mask_track_from_json(const Json& j);

/// Second keys covered by a track: floor(t) for t in [0, duration).
std::vector<int> track_seconds(double duration_s);
/// Integer seconds inside a verified window, clipped to the video.
std::vector<int> window_seconds(double start_s, double end_s, double duration_s);

struct SegmentRequest {
  std::string sample_id;
  std::string video_path;
  std::string tag;
  double fps = 1.0;
};

/// Text-conditioned segmentation service. Returns the response document
/// {"frame_size": {"w", "h"}, "masks": {"<second>": RLE}}.
class SegmentationClient {
 public:
  virtual ~SegmentationClient() = default;
  virtual Json segment(const SegmentRequest& request) = 0;
};

/// POST <url>/segment with {"sample_id", "video_path", "tag", "fps"}.
class HttpSegmentationClient final : public SegmentationClient {
 public:
  explicit HttpSegmentationClient(EndpointConfig endpoint);
  Json segment(const SegmentRequest& request) override;

 private:
  EndpointConfig endpoint_;
};

/// Script document: {"role": "segmenter", "steps": [{"match": {"sample_id",
/// "tag"}, "respond": {...}}], "default": {...}, "unreachable": false}.
class ScriptedSegmentationClient final : public SegmentationClient {
 public:
  explicit ScriptedSegmentationClient(Json script);
  static ScriptedSegmentationClient load(const fs::path& path);
  Json segment(const SegmentRequest& request) override;

 private:
  Json script_;
};

class FunctionSegmentationClient final : public SegmentationClient {
 public:
  using Fn = std::function<Json(const SegmentRequest&)>;
  explicit FunctionSegmentationClient(Fn fn) : fn_(std::move(fn)) {}
  Json segment(const SegmentRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

std::unique_ptr<SegmentationClient> make_segmentation_client(const EndpointConfig& endpoint);

struct FinalSample {
  /// Rewritten sample with vp_frame, vp_type and mark_number set.
  Sample sample;
  std::string tag;
  double window_start = 0;
  double window_end = 0;
  int render_second = 0;
};

Json to_json(const FinalSample& f);
FinalSample final_sample_from_json(const Json& j);

enum class StageStatus { kept, rejected, quarantined, error };
std::string_view to_string(StageStatus s);
StageStatus parse_stage_status(std::string_view s);

/// One persisted per-sample stage result.
struct StageRecord {
  std::string sample_id;
  StageStatus status = StageStatus::kept;
  /// Reason category counted in the ledger (empty when kept).
  std::string reason;
  /// Free-text explanation (model reason or error message).
  std::string detail;
  /// Stage payload: verification record, mask-track ref, or final sample.
  Json payload;
};

Json to_json(const StageRecord& r);
StageRecord stage_record_from_json(const Json& j);

struct StageLedger {
  std::string name;
  long long input_count = 0;
  long long output_count = 0;
  std::map<std::string, long long> rejection_reasons;
};

struct RetentionLedger {
  long long initial_count = 0;
  std::array<StageLedger, 4> stages;

  /// Output of stage k (0-based) over the initial count.
  double cumulative_ratio(std::size_t k) const;
  /// ManifestInvalid when any stage violates input = output + rejections,
  /// output <= input, or stage chaining.
  void check() const;
  std::string table() const;
};

Json to_json(const RetentionLedger& l);

inline constexpr std::array<const char*, 4> kStageNames = {"text_filter", "video_verification", "segmentation",
                                                           "rendering"};

/// Latest record per sample in file order.
std::vector<StageRecord> read_stage_records(const fs::path& path);

/// Ledger recomputed from <run_dir>/stage{1..4}.jsonl and the dataset size.
RetentionLedger ledger_from_stage_files(const fs::path& run_dir, long long initial_count);

struct PipelineClients {
  ChatClient* filter = nullptr;
  ChatClient* verifier = nullptr;
  SegmentationClient* segmenter = nullptr;
  /// Optional model-backed smoothing of the phrase-table rewrite.
  ChatClient* rewriter = nullptr;
};

struct PipelineSettings {
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  RenderStyle style;
  int max_response_tokens = 4096;
  /// Stages to run, in order; anything but the full G1..G4 chain is a
  /// configuration error.
  std::vector<int> stages = {1, 2, 3, 4};
  const std::atomic<bool>* stop = nullptr;
};

struct PipelineResult {
  std::vector<FinalSample> final;
  RetentionLedger ledger;
  bool interrupted = false;
};

/// The four-stage synthesis chain. `env` supplies media decoding, the asset
/// store (verifier frames) and the frame budget used for encoding videos.
class Pipeline {
 public:
  Pipeline(PipelineClients clients, const ToolEnvironment& env, PipelineSettings settings = {},
           const PromptLibrary& prompts = PromptLibrary::builtin());

  /// Throws ClientUnreachable or UnparseableVerdict.
  FilterDecision stage1_filter(const Sample& sample) const;
  /// Throws SchemaViolation (reason "verifier_schema"), ClientUnreachable,
  /// UnparseableVerdict.
  VerificationRecord stage2_verify(const Sample& sample) const;
  /// Track over every second of the video. Throws MaskShapeMismatch,
  /// SchemaViolation.
  MaskTrack stage3_segment(const Sample& sample, const VerificationRecord& record) const;
  /// True when some second of the verified window has a non-empty mask.
  static bool window_has_target(const MaskTrack& track, const VerificationRecord& record, double duration_s);
  /// Renders the prompt frame into `vp_dir`. Throws NoRenderableFrame,
  /// RewriteSchemaViolation, MissingPlaceholder, MultiplePlaceholders.
  FinalSample stage4_render(const Sample& sample, const VerificationRecord& record, const MaskTrack& track,
                            const fs::path& vp_dir) const;

  VpType draw_vp_type(const std::string& sample_id) const;

  /// Runs G1..G4 with per-stage persistence under run_dir (stage1.jsonl ..
  /// stage4.jsonl, final.jsonl sorted by sample_id, ledger.json). With
  /// resume, samples already recorded are skipped.
  PipelineResult run(std::vector<Sample> dataset, const fs::path& run_dir, bool resume) const;

 private:
  const PipelineClients clients_;
  const ToolEnvironment& env_;
  PipelineSettings settings_;
  const PromptLibrary& prompts_;
};

/// File-name-safe, collision-resistant stem for a sample id.
std::string sample_file_stem(const std::string& sample_id);

}  // namespace vpa
