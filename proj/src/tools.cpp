#include "vpagent/tools.hpp"

#include <cmath>

#include "vpagent/error.hpp"

namespace vpa {

void ToolBudget::validate() const {
  if (t_max < 0) throw Error(ErrorCode::ConfigError, "t_max must be >= 0");
  if (crop_frame_cap <= 0) throw Error(ErrorCode::ConfigError, "crop_frame_cap must be positive");
  if (max_pixels <= 0) throw Error(ErrorCode::ConfigError, "max_pixels must be positive");
  if (max_frames <= 0) throw Error(ErrorCode::ConfigError, "max_frames must be positive");
  if (!(fps > 0) || !std::isfinite(fps)) throw Error(ErrorCode::ConfigError, "fps must be positive");
}

Json to_json(const ToolBudget& b) {
  return {{"t_max", b.t_max},
          {"crop_frame_cap", b.crop_frame_cap},
          {"max_pixels", b.max_pixels},
          {"max_frames", b.max_frames},
          {"fps", b.fps}};
}

ToolBudget tool_budget_from_json(const Json& j, ToolBudget d) {
  d.t_max = j.value("t_max", d.t_max);
  d.crop_frame_cap = j.value("crop_frame_cap", d.crop_frame_cap);
  d.max_pixels = j.value("max_pixels", d.max_pixels);
  d.max_frames = j.value("max_frames", d.max_frames);
  d.fps = j.value("fps", d.fps);
  d.validate();
  return d;
}

std::string frame_label(double timestamp_s) { return "Frame at " + format_decimal1(timestamp_s) + "s"; }

std::vector<double> whole_video_timestamps(double duration_s, double fps, int max_frames) {
  if (!(duration_s > 0)) throw Error(ErrorCode::EmptyVideo, "duration must be positive");
  if (!(fps > 0)) throw Error(ErrorCode::InvalidArguments, "fps must be positive");
  const auto n = static_cast<long long>(std::floor(duration_s * fps + 1e-9));
  std::vector<double> out;
  if (n <= max_frames) {
    out.reserve(static_cast<std::size_t>(n));
    for (long long k = 0; k < n; ++k) out.push_back(static_cast<double>(k) / fps);
  } else {
    out.reserve(static_cast<std::size_t>(max_frames));
    for (int i = 0; i < max_frames; ++i) out.push_back(static_cast<double>(i) * duration_s / max_frames);
  }
  return out;
}

std::vector<double> crop_timestamps(double duration_s, double tau_s, double tau_e, double fps, int cap) {
  if (!std::isfinite(tau_s) || !std::isfinite(tau_e) || tau_s < 0) {
    throw Error(ErrorCode::InvalidWindow, "start must be a finite non-negative number of seconds");
  }
  if (tau_s >= tau_e) {
    throw Error(ErrorCode::InvalidWindow,
                "start " + format_decimal1(tau_s) + "s must be before end " + format_decimal1(tau_e) + "s");
  }
  if (tau_s >= duration_s) {
    throw Error(ErrorCode::InvalidWindow,
                "start " + format_decimal1(tau_s) + "s is past the video end " + format_decimal1(duration_s) + "s");
  }
  const double end = std::min(tau_e, duration_s);
  std::vector<double> all;
  for (long long k = 0;; ++k) {
    const double t = tau_s + static_cast<double>(k) / fps;
    if (t > end + 1e-9 || t >= duration_s - 1e-9) break;
    all.push_back(t);
  }
  if (static_cast<long long>(all.size()) <= cap) return all;
  std::vector<double> picked;
  picked.reserve(static_cast<std::size_t>(cap));
  for (int i = 0; i < cap; ++i) picked.push_back(all[static_cast<std::size_t>(i) * all.size() / cap]);
  return picked;
}

namespace {

FrameSequence decode_sequence(const MediaBackend& media, const VideoRef& video, std::vector<double> times,
                              long long max_pixels, double window_start, double window_end) {
  FrameSequence seq;
  seq.source = video;
  seq.window_start = window_start;
  seq.window_end = window_end;
  auto images = media.frames_at(video, times);
  seq.frames.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    seq.frames.push_back({cap_resolution(images[i], max_pixels), times[i]});
  }
  return seq;
}

}  // namespace

FrameSequence encode_video_frames(const MediaBackend& media, const VideoRef& video, double fps, int max_frames,
                                  long long max_pixels) {
  if (!(video.duration_s > 0)) throw Error(ErrorCode::EmptyVideo, video.path.string());
  return decode_sequence(media, video, whole_video_timestamps(video.duration_s, fps, max_frames), max_pixels, 0,
                         video.duration_s);
}

FrameSequence crop_video(const MediaBackend& media, const VideoRef& video, double tau_s, double tau_e,
                         const ToolBudget& budget) {
  auto times = crop_timestamps(video.duration_s, tau_s, tau_e, budget.fps, budget.crop_frame_cap);
  return decode_sequence(media, video, std::move(times), budget.max_pixels, tau_s, std::min(tau_e, video.duration_s));
}

Image view_visual_prompt(const std::filesystem::path& prompt_path, long long max_pixels) {
  return cap_resolution(read_image(prompt_path), max_pixels);
}

ToolEnvironment::ToolEnvironment(const MediaBackend& media, AssetStore& assets, ToolBudget budget)
    : media_(media), assets_(assets), budget_(budget) {
  budget_.validate();
}

std::string ToolEnvironment::store_sequence(const FrameSequence& seq) const {
  Json frames = Json::array();
  for (const auto& f : seq.frames) {
    frames.push_back({{"ref", assets_.put_image(f.image)}, {"timestamp", f.timestamp_s}});
  }
  const Json doc = {{"source", seq.source.path.filename().string()},
                    {"window", {seq.window_start, seq.window_end}},
                    {"frames", std::move(frames)}};
  return assets_.put_document(doc.dump());
}

std::string ToolEnvironment::encode_video_ref(const VideoRef& video) const {
  const auto key = video.path.string();
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = encode_cache_.find(key); it != encode_cache_.end()) return it->second;
  }
  auto ref = store_sequence(encode_video_frames(media_, video, budget_.fps, budget_.max_frames, budget_.max_pixels));
  std::lock_guard lock(cache_mu_);
  encode_cache_.emplace(key, ref);
  return ref;
}

Message ToolEnvironment::execute(const ToolCall& call, const ToolContext& ctx) const {
  try {
    if (const auto why = argument_schema_violation(call.function, call.arguments); !why.empty()) {
      throw Error(ErrorCode::InvalidArguments, why);
    }
    switch (call.function) {
      case ToolFunction::view_visual_prompt: {
        const auto path = call.arguments["path"].get<std::string>();
        if (path != ctx.visual_prompt_path) {
          throw Error(ErrorCode::AssetNotFound, "'" + path + "' is not a registered visual prompt frame");
        }
        const auto ref = assets_.put_image(view_visual_prompt(path, budget_.max_pixels));
        return Message::make(Role::tool, {ContentPart::image(ref)});
      }
      case ToolFunction::crop_video: {
        if (call.arguments.contains("video_path") &&
            call.arguments["video_path"].get<std::string>() != ctx.video.path.string()) {
          throw Error(ErrorCode::AssetNotFound,
                      "'" + call.arguments["video_path"].get<std::string>() + "' is not the video under analysis");
        }
        const auto seq = crop_video(media_, ctx.video, call.arguments["start"].get<double>(),
                                    call.arguments["end"].get<double>(), budget_);
        return Message::make(Role::tool, {ContentPart::frames(store_sequence(seq))});
      }
    }
    throw Error(ErrorCode::UnknownTool, std::string(to_string(call.function)));
  } catch (const Error& e) {
    return Message::text(Role::tool, e.what());
  } catch (const std::exception& e) {
    return Message::text(Role::tool, std::string("ToolError: ") + e.what());
  }
}

std::vector<Message> ToolEnvironment::execute_tools(std::span<const ToolCall> calls, const ToolContext& ctx) const {
  std::vector<Message> out;
  out.reserve(calls.size());
  for (const auto& c : calls) out.push_back(execute(c, ctx));
  return out;
}

SequenceDocument parse_sequence_document(const std::string& contents) {
  const auto j = Json::parse(contents);
  SequenceDocument doc;
  doc.source = j.at("source").get<std::string>();
  doc.window_start = j.at("window").at(0).get<double>();
  doc.window_end = j.at("window").at(1).get<double>();
  for (const auto& f : j.at("frames")) {
    doc.frames.emplace_back(f.at("ref").get<std::string>(), f.at("timestamp").get<double>());
  }
  return doc;
}

}  // namespace vpa
