#pragma once

#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "vpagent/asset_store.hpp"
#include "vpagent/media.hpp"
#include "vpagent/trajectory.hpp"

namespace vpa {

struct ToolBudget {
  int t_max = 5;
  int crop_frame_cap = 64;
  long long max_pixels = 112896;
  int max_frames = 256;
  double fps = 1.0;

  /// Throws ConfigError unless every field is positive (t_max may be 0).
  void validate() const;
  friend bool operator==(const ToolBudget&, const ToolBudget&) = default;
};

Json to_json(const ToolBudget& b);
ToolBudget tool_budget_from_json(const Json& j, ToolBudget defaults = {});

struct TimedFrame {
  Image image;
  double timestamp_s = 0;
};

struct FrameSequence {
  std::vector<TimedFrame> frames;
  VideoRef source;
  double window_start = 0;
  double window_end = 0;
};

/// "Frame at 2.5s"
std::string frame_label(double timestamp_s);

/// Sampling times for whole-video encoding: k/fps while the count
/// floor(duration*fps) fits in max_frames, otherwise max_frames times spread
/// uniformly over [0, duration).
std::vector<double> whole_video_timestamps(double duration_s, double fps, int max_frames);

/// Sampling times for a temporal crop: tau_s + k/fps within
/// [tau_s, min(tau_e, duration)], excluding t == duration, uniformly
/// subsampled to at most `cap`. Throws InvalidWindow.
std::vector<double> crop_timestamps(double duration_s, double tau_s, double tau_e, double fps, int cap);

FrameSequence encode_video_frames(const MediaBackend& media, const VideoRef& video, double fps, int max_frames,
                                  long long max_pixels);
FrameSequence crop_video(const MediaBackend& media, const VideoRef& video, double tau_s, double tau_e,
                         const ToolBudget& budget);
/// Decoded prompt frame capped to max_pixels. Throws AssetNotFound / DecodeFailure.
Image view_visual_prompt(const std::filesystem::path& prompt_path, long long max_pixels);

/// What one trajectory is allowed to touch.
struct ToolContext {
  VideoRef video;
  /// Path string of the visual-prompt frame exactly as announced to the model.
  std::string visual_prompt_path;
};

/// Executes the perception tool set against a media backend, registering
/// decoded frames in an asset store. Safe for concurrent use.
class ToolEnvironment {
 public:
  ToolEnvironment(const MediaBackend& media, AssetStore& assets, ToolBudget budget);

  const ToolBudget& budget() const { return budget_; }
  const MediaBackend& media() const { return media_; }
  AssetStore& assets() const { return assets_; }

  /// Stores every frame and a sequence document; returns the document ref.
  std::string store_sequence(const FrameSequence& seq) const;
  /// Whole-video encoding, cached per video path.
  std::string encode_video_ref(const VideoRef& video) const;

  /// One tool-role message per call, in order. Failures become a text part
  /// "<ErrorName>: <detail>"; nothing propagates.
  std::vector<Message> execute_tools(std::span<const ToolCall> calls, const ToolContext& ctx) const;
  Message execute(const ToolCall& call, const ToolContext& ctx) const;

 private:
  const MediaBackend& media_;
  AssetStore& assets_;
  ToolBudget budget_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::string, std::string> encode_cache_;
};

struct SequenceDocument {
  std::string source;
  double window_start = 0;
  double window_end = 0;
  std::vector<std::pair<std::string, double>> frames;  // (image ref, timestamp)
};

SequenceDocument parse_sequence_document(const std::string& contents);

}  // namespace vpa
