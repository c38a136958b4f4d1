#include "vpagent/vp_render.hpp"

#include <cmath>
#include <opencv2/imgproc.hpp>
#include <random>

#include "vpagent/error.hpp"

namespace vpa {

namespace {

constexpr std::array<std::string_view, 8> kNames = {"rectangle", "mask_contour", "ellipse", "triangle",
                                                    "scribble",  "point",        "arrow",   "set_of_mark"};

cv::Scalar scalar(Rgb c) { return {static_cast<double>(c.r), static_cast<double>(c.g), static_cast<double>(c.b)}; }

cv::Point clamp_point(cv::Point p, const Image& img) {
  return {std::clamp(p.x, 0, img.width() - 1), std::clamp(p.y, 0, img.height() - 1)};
}

cv::Point rounded(Centroid c) {
  return {static_cast<int>(std::lround(c.x)), static_cast<int>(std::lround(c.y))};
}

void draw_rectangle(cv::Mat& m, const BBox& b, const RenderStyle& s) {
  cv::rectangle(m, cv::Point(b.x0, b.y0), cv::Point(b.x1, b.y1), scalar(s.color), s.stroke_px, cv::LINE_8);
}

void draw_contours(cv::Mat& m, const Mask& mask, const RenderStyle& s) {
  for (const auto& c : trace_contour(mask)) {
    std::vector<cv::Point> pts;
    pts.reserve(c.points.size());
    for (const auto& p : c.points) pts.emplace_back(p.x, p.y);
    cv::polylines(m, pts, true, scalar(s.color), s.stroke_px, cv::LINE_8);
  }
}

void draw_ellipse(cv::Mat& m, const BBox& b, const RenderStyle& s) {
  // One fractional bit so even-sized boxes keep their exact center.
  const cv::Point center(b.x0 + b.x1, b.y0 + b.y1);
  const cv::Size axes(std::max(1, b.x1 - b.x0), std::max(1, b.y1 - b.y0));
  cv::ellipse(m, center, axes, 0, 0, 360, scalar(s.color), s.stroke_px, cv::LINE_8, 1);
}

void draw_point(cv::Mat& m, Centroid c, const RenderStyle& s) {
  const int radius = std::max(2 * s.stroke_px, 3);
  constexpr int kShift = 2;
  const cv::Point center(static_cast<int>(std::lround(c.x * (1 << kShift))),
                         static_cast<int>(std::lround(c.y * (1 << kShift))));
  cv::circle(m, center, radius << kShift, scalar(s.color), cv::FILLED, cv::LINE_8, kShift);
}

void draw_arrow(cv::Mat& m, const Image& frame, const BBox& b, Centroid c, const RenderStyle& s) {
  const auto tail = clamp_point({b.x1 + s.arrow_offset_px, b.y0 - s.arrow_offset_px}, frame);
  const auto tip = clamp_point(rounded(c), frame);
  cv::arrowedLine(m, tail, tip, scalar(s.color), s.stroke_px, cv::LINE_8, 0, 0.3);
}

void draw_triangle(cv::Mat& m, const Image& frame, const BBox& b, const RenderStyle& s) {
  const int size = std::max(3 * s.stroke_px, 8);
  const int half = size / 2;
  const int gap = 2;
  int cx = (b.x0 + b.x1) / 2;
  int apex_y = b.y0 - gap;
  const int lo = std::min(half, frame.width() - 1);
  cx = std::clamp(cx, lo, std::max(lo, frame.width() - 1 - half));
  apex_y = std::clamp(apex_y, std::min(size, frame.height() - 1), frame.height() - 1);
  const std::array<cv::Point, 3> tri = {cv::Point(cx - half, apex_y - size), cv::Point(cx + half, apex_y - size),
                                        cv::Point(cx, apex_y)};
  cv::fillConvexPoly(m, tri.data(), 3, scalar(s.color), cv::LINE_8);
}

void draw_scribble(cv::Mat& m, const Mask& mask, const RenderStyle& s) {
  const auto path = scribble_path(mask, s);
  std::vector<cv::Point> pts;
  pts.reserve(path.size());
  for (const auto& p : path) pts.emplace_back(p.x, p.y);
  cv::polylines(m, pts, false, scalar(s.color), s.stroke_px, cv::LINE_8);
}

void draw_mark(cv::Mat& m, const Image& frame, const BBox& b, std::optional<int> number, const RenderStyle& s) {
  const std::string label = number ? std::to_string(*number) : "?";
  const int font = cv::FONT_HERSHEY_SIMPLEX;
  const int thickness = std::max(1, s.label_font_px / 10);
  const double scale = cv::getFontScaleFromHeight(font, s.label_font_px, thickness);
  int baseline = 0;
  const auto text = cv::getTextSize(label, font, scale, thickness, &baseline);
  const int pad = 2;
  const int box_w = text.width + 2 * pad;
  const int box_h = text.height + baseline + 2 * pad;
  const int x0 = std::clamp(b.x0, 0, std::max(0, frame.width() - box_w));
  const int y0 = std::clamp(b.y0, 0, std::max(0, frame.height() - box_h));
  cv::rectangle(m, cv::Point(x0, y0), cv::Point(x0 + box_w - 1, y0 + box_h - 1), scalar(s.color), cv::FILLED,
                cv::LINE_8);
  cv::putText(m, label, cv::Point(x0 + pad, y0 + pad + text.height), font, scale, cv::Scalar(255, 255, 255),
              thickness, cv::LINE_8);
}

}  // namespace

std::string_view to_string(VpType t) { return kNames[static_cast<std::size_t>(t)]; }

std::optional<VpType> parse_vp_type(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == s) return kAllVpTypes[i];
  }
  return std::nullopt;
}

void RenderStyle::validate() const {
  if (stroke_px < 1) throw Error(ErrorCode::ConfigError, "stroke_px must be >= 1");
  if (label_font_px < 1) throw Error(ErrorCode::ConfigError, "label_font_px must be >= 1");
}

std::vector<Point> scribble_path(const Mask& mask, const RenderStyle& style) {
  const auto comp = connected_components(mask);
  if (comp.empty()) throw Error(ErrorCode::EmptyMask, "mask has no set cells");
  std::size_t best = 0;
  for (std::size_t i = 1; i < comp.size(); ++i) {
    if (comp[i].size() > comp[best].size()) best = i;
  }
  const auto& cells = comp[best];
  Mask region(mask.width(), mask.height());
  for (const auto& p : cells) region.set(p.x, p.y);

  std::mt19937_64 rng(style.seed);
  const auto steps = static_cast<std::size_t>(std::max(2.0, std::round(4.0 * std::sqrt(double(cells.size())))));
  const int step = std::max(1, style.stroke_px);
  Point cur = cells[rng() % cells.size()];
  std::vector<Point> path{cur};
  for (std::size_t k = 1; k < steps; ++k) {
    for (int attempt = 0; attempt < 16; ++attempt) {
      const auto dir = static_cast<int>(rng() % 8);
      static constexpr std::array<std::array<int, 2>, 8> kStep = {
          {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
      const Point next{cur.x + kStep[dir][0] * step, cur.y + kStep[dir][1] * step};
      if (region.get(next.x, next.y)) {
        cur = next;
        path.push_back(cur);
        break;
      }
    }
  }
  return path;
}

Image render_prompt(const Image& frame, const Mask& mask, VpType vp, const RenderStyle& style,
                    std::optional<int> mark_number) {
  style.validate();
  if (frame.width() != mask.width() || frame.height() != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask " + std::to_string(mask.width()) + "x" +
                                                  std::to_string(mask.height()) + " vs frame " +
                                                  std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  }
  if (mask.empty()) throw Error(ErrorCode::EmptyMask, "mask has no set cells");

  Image out = frame;
  cv::Mat m(out.height(), out.width(), CV_8UC3, out.bytes().data());
  if (vp == VpType::mask_contour) {
    draw_contours(m, mask, style);
    return out;
  }
  const auto target = largest_component(mask);
  const auto box = mask_to_bbox(target);
  switch (vp) {
    case VpType::rectangle: draw_rectangle(m, box, style); break;
    case VpType::ellipse: draw_ellipse(m, box, style); break;
    case VpType::point: draw_point(m, mask_centroid(target), style); break;
    case VpType::arrow: draw_arrow(m, out, box, mask_centroid(target), style); break;
    case VpType::triangle: draw_triangle(m, out, box, style); break;
    case VpType::scribble: draw_scribble(m, target, style); break;
    case VpType::set_of_mark: draw_mark(m, out, box, mark_number, style); break;
    case VpType::mask_contour: break;
  }
  return out;
}

std::string vp_phrase(VpType vp, std::optional<int> mark_number) {
  switch (vp) {
    case VpType::rectangle: return "the target in the highlighted box";
    case VpType::mask_contour: return "the target outlined by the contour";
    case VpType::ellipse: return "the target inside the ellipse";
    case VpType::triangle: return "the target indicated by the triangle marker";
    case VpType::scribble: return "the target under the scribble mark";
    case VpType::point: return "the target marked by the point";
    case VpType::arrow: return "the target indicated by the arrow";
    case VpType::set_of_mark:
      return mark_number ? "the target marked with number " + std::to_string(*mark_number) : "the numbered target";
  }
  return {};
}

std::size_t count_vp_tokens(std::string_view text) {
  std::size_t n = 0;
  for (auto pos = text.find(kVpToken); pos != std::string_view::npos; pos = text.find(kVpToken, pos + kVpToken.size())) {
    ++n;
  }
  return n;
}

std::string substitute_vp_all(std::string_view text, VpType vp, std::optional<int> mark_number) {
  const auto phrase = vp_phrase(vp, mark_number);
  std::string out;
  std::size_t from = 0;
  for (auto pos = text.find(kVpToken); pos != std::string_view::npos; pos = text.find(kVpToken, from)) {
    out.append(text.substr(from, pos - from));
    out += phrase;
    from = pos + kVpToken.size();
  }
  out.append(text.substr(from));
  return out;
}

std::string substitute_vp(std::string_view question, VpType vp, std::optional<int> mark_number) {
  const auto n = count_vp_tokens(question);
  if (n == 0) throw Error(ErrorCode::MissingPlaceholder, "no <vp> token in '" + std::string(question) + "'");
  if (n > 1) throw Error(ErrorCode::MultiplePlaceholders, std::to_string(n) + " <vp> tokens in '" + std::string(question) + "'");
  return substitute_vp_all(question, vp, mark_number);
}

}  // namespace vpa
