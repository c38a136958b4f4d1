#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vpagent/media.hpp"

namespace vpa {

/// One video-QA item. The visual-prompt fields are filled once rendering
/// has produced a prompt frame.
struct Sample {
  std::string sample_id;
  VideoRef video;
  std::string question;
  std::optional<std::vector<std::string>> options;
  std::string answer;
  std::string source;
  std::optional<std::string> vp_frame;
  std::optional<std::string> vp_type;
  std::optional<int> mark_number;

  /// SchemaViolation when sample_id, question or answer is empty.
  void validate() const;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// "video" may be a full VideoRef object or a bare path string (probed later).
Json to_json(const Sample& s);
Sample sample_from_json(const Json& j);

std::vector<Sample> read_samples(const fs::path& path);
void write_samples(const fs::path& path, const std::vector<Sample>& samples);

/// Probes the video when its duration is still unknown.
void resolve_video(Sample& s, const MediaBackend& media);

/// Options as "A. text" lines; options that already carry a letter prefix
/// are kept verbatim. Empty when there are no options.
std::string format_options(const std::optional<std::vector<std::string>>& options);

}  // namespace vpa
