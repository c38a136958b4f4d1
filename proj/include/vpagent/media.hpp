#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "vpagent/image.hpp"
#include "vpagent/util.hpp"

namespace vpa {

struct VideoRef {
  std::filesystem::path path;
  double duration_s = 0;
  double native_fps = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const VideoRef&, const VideoRef&) = default;
};

Json to_json(const VideoRef& v);
VideoRef video_ref_from_json(const Json& j);

/// Decoding backend. Implementations must be safe for concurrent calls.
class MediaBackend {
 public:
  virtual ~MediaBackend() = default;

  virtual bool handles(const std::filesystem::path& path) const = 0;
  /// Throws VideoUnreadable / EmptyVideo.
  virtual VideoRef probe(const std::filesystem::path& path) const = 0;
  /// One decoded frame per requested timestamp (seconds, ascending).
  virtual std::vector<Image> frames_at(const VideoRef& video, std::span<const double> timestamps) const = 0;
};

/// Renders `*.synth.json` manifests on the fly:
///
///   {"width": 64, "height": 36, "fps": 30,
///    "segments": [{"duration": 10, "color": [255, 0, 0],
///                  "boxes": [{"x": 4, "y": 4, "w": 8, "h": 8, "color": [0, 0, 255]}]}]}
///
/// Frame content at time t is the segment containing t: a solid fill plus
/// optional boxes. Duration is the sum of segment durations.
class SyntheticVideoBackend final : public MediaBackend {
 public:
  bool handles(const std::filesystem::path& path) const override;
  VideoRef probe(const std::filesystem::path& path) const override;
  std::vector<Image> frames_at(const VideoRef& video, std::span<const double> timestamps) const override;

  static bool is_synthetic(const std::filesystem::path& path);
  static Json make_manifest(int width, int height, double fps, const std::vector<std::pair<double, Rgb>>& segments);
};

/// Container formats (mp4, webm, ...) via OpenCV's ffmpeg-backed videoio.
class OpenCvVideoBackend final : public MediaBackend {
 public:
  bool handles(const std::filesystem::path& path) const override;
  VideoRef probe(const std::filesystem::path& path) const override;
  std::vector<Image> frames_at(const VideoRef& video, std::span<const double> timestamps) const override;
};

/// Synthetic manifests first, then containers.
class DefaultMediaBackend final : public MediaBackend {
 public:
  bool handles(const std::filesystem::path& path) const override;
  VideoRef probe(const std::filesystem::path& path) const override;
  std::vector<Image> frames_at(const VideoRef& video, std::span<const double> timestamps) const override;

 private:
  const MediaBackend& pick(const std::filesystem::path& path) const;
  SyntheticVideoBackend synthetic_;
  OpenCvVideoBackend container_;
};

}  // namespace vpa
