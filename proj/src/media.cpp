#include "vpagent/media.hpp"

#include <cmath>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "vpagent/error.hpp"

namespace vpa {

Json to_json(const VideoRef& v) {
  return {{"path", v.path.string()},
          {"duration_s", v.duration_s},
          {"native_fps", v.native_fps},
          {"width", v.width},
          {"height", v.height}};
}

VideoRef video_ref_from_json(const Json& j) {
  VideoRef v;
  v.path = j.at("path").get<std::string>();
  v.duration_s = j.value("duration_s", 0.0);
  v.native_fps = j.value("native_fps", 0.0);
  v.width = j.value("width", 0);
  v.height = j.value("height", 0);
  return v;
}

// --- synthetic -------------------------------------------------------------

namespace {

Rgb rgb_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::VideoUnreadable, "color must be [r, g, b]");
  return {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

Json load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::VideoUnreadable, "no such file " + path.string());
  auto doc = Json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::VideoUnreadable, "bad synthetic manifest " + path.string());
  }
  return doc;
}

}  // namespace

bool SyntheticVideoBackend::is_synthetic(const std::filesystem::path& path) {
  const auto name = path.filename().string();
  constexpr std::string_view suffix = ".synth.json";
  return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool SyntheticVideoBackend::handles(const std::filesystem::path& path) const { return is_synthetic(path); }

Json SyntheticVideoBackend::make_manifest(int width, int height, double fps,
                                          const std::vector<std::pair<double, Rgb>>& segments) {
  Json segs = Json::array();
  for (const auto& [dur, c] : segments) segs.push_back({{"duration", dur}, {"color", {c.r, c.g, c.b}}});
  return {{"width", width}, {"height", height}, {"fps", fps}, {"segments", segs}};
}

VideoRef SyntheticVideoBackend::probe(const std::filesystem::path& path) const {
  const auto doc = load_manifest(path);
  VideoRef v;
  v.path = path;
  try {
    v.width = doc.at("width").get<int>();
    v.height = doc.at("height").get<int>();
    v.native_fps = doc.value("fps", 30.0);
    for (const auto& seg : doc.at("segments")) v.duration_s += seg.at("duration").get<double>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::VideoUnreadable, path.string() + ": " + e.what());
  }
  if (v.width <= 0 || v.height <= 0 || v.native_fps <= 0) {
    throw Error(ErrorCode::VideoUnreadable, "non-positive geometry in " + path.string());
  }
  if (v.duration_s <= 0) throw Error(ErrorCode::EmptyVideo, path.string());
  return v;
}

std::vector<Image> SyntheticVideoBackend::frames_at(const VideoRef& video, std::span<const double> timestamps) const {
  const auto doc = load_manifest(video.path);
  const auto& segs = doc.at("segments");
  std::vector<Image> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) {
    double start = 0;
    const Json* chosen = &segs.back();
    for (const auto& seg : segs) {
      const double end = start + seg.at("duration").get<double>();
      if (t < end) {
        chosen = &seg;
        break;
      }
      start = end;
    }
    Image frame(video.width, video.height, rgb_from_json(chosen->at("color")));
    if (chosen->contains("boxes")) {
      for (const auto& box : (*chosen)["boxes"]) {
        const int x0 = box.at("x").get<int>();
        const int y0 = box.at("y").get<int>();
        const Rgb c = rgb_from_json(box.at("color"));
        for (int y = y0; y < y0 + box.at("h").get<int>(); ++y) {
          for (int x = x0; x < x0 + box.at("w").get<int>(); ++x) frame.plot(x, y, c);
        }
      }
    }
    out.push_back(std::move(frame));
  }
  return out;
}

// --- containers ------------------------------------------------------------

bool OpenCvVideoBackend::handles(const std::filesystem::path&) const { return true; }

VideoRef OpenCvVideoBackend::probe(const std::filesystem::path& path) const {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::VideoUnreadable, "no such file " + path.string());
  cv::VideoCapture cap(path.string());
  if (!cap.isOpened()) throw Error(ErrorCode::VideoUnreadable, "cannot open " + path.string());
  VideoRef v;
  v.path = path;
  v.native_fps = cap.get(cv::CAP_PROP_FPS);
  v.width = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_WIDTH));
  v.height = static_cast<int>(cap.get(cv::CAP_PROP_FRAME_HEIGHT));
  const double count = cap.get(cv::CAP_PROP_FRAME_COUNT);
  if (v.native_fps <= 0 || v.width <= 0 || v.height <= 0) {
    throw Error(ErrorCode::VideoUnreadable, "cannot probe " + path.string());
  }
  v.duration_s = count / v.native_fps;
  if (v.duration_s <= 0) throw Error(ErrorCode::EmptyVideo, path.string());
  return v;
}

std::vector<Image> OpenCvVideoBackend::frames_at(const VideoRef& video, std::span<const double> timestamps) const {
  cv::VideoCapture cap(video.path.string());
  if (!cap.isOpened()) throw Error(ErrorCode::VideoUnreadable, "cannot open " + video.path.string());
  std::vector<Image> out;
  out.reserve(timestamps.size());
  long long position = -1;  // index of the frame last grabbed
  cv::Mat bgr;
  for (double t : timestamps) {
    const auto target = static_cast<long long>(std::floor(t * video.native_fps + 1e-6));
    while (position < target) {
      if (!cap.grab()) break;
      ++position;
    }
    if (position < 0 || !cap.retrieve(bgr) || bgr.empty()) {
      throw Error(ErrorCode::VideoUnreadable, "cannot decode frame at " + format_decimal1(t) + "s");
    }
    Image frame(bgr.cols, bgr.rows);
    cv::Mat dst(frame.height(), frame.width(), CV_8UC3, frame.bytes().data());
    cv::cvtColor(bgr, dst, cv::COLOR_BGR2RGB);
    out.push_back(std::move(frame));
  }
  return out;
}

// --- dispatch --------------------------------------------------------------

const MediaBackend& DefaultMediaBackend::pick(const std::filesystem::path& path) const {
  if (synthetic_.handles(path)) return synthetic_;
  return container_;
}

bool DefaultMediaBackend::handles(const std::filesystem::path&) const { return true; }

VideoRef DefaultMediaBackend::probe(const std::filesystem::path& path) const { return pick(path).probe(path); }

std::vector<Image> DefaultMediaBackend::frames_at(const VideoRef& video, std::span<const double> timestamps) const {
  return pick(video.path).frames_at(video, timestamps);
}

}  // namespace vpa
