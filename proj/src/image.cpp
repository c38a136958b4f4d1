#include "vpagent/image.hpp"

#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vpagent/error.hpp"
#include "vpagent/util.hpp"

namespace vpa {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::DimensionMismatch, "negative image size");
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Rgb Image::at(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  pixels_[i] = c.r;
  pixels_[i + 1] = c.g;
  pixels_[i + 2] = c.b;
}

Size capped_size(Size in, long long max_pixels) {
  if (in.area() <= max_pixels || in.width == 0 || in.height == 0) return in;
  const double scale = std::sqrt(static_cast<double>(max_pixels) / static_cast<double>(in.area()));
  // The epsilon keeps exact ratios such as 0.35 from flooring one pixel short.
  long long w = std::max(1LL, static_cast<long long>(std::floor(in.width * scale + 1e-9)));
  long long h = std::max(1LL, static_cast<long long>(std::floor(in.height * scale + 1e-9)));
  while (w * h > max_pixels && (w > 1 || h > 1)) {
    if (w >= h && w > 1) {
      --w;
      h = std::max(1LL, w * in.height / in.width);
    } else {
      --h;
      w = std::max(1LL, h * in.width / in.height);
    }
  }
  return {static_cast<int>(w), static_cast<int>(h)};
}

namespace {

cv::Mat as_mat(const Image& img) {
  return cv::Mat(img.height(), img.width(), CV_8UC3,
                 const_cast<std::uint8_t*>(img.bytes().data()));
}

Image from_bgr(const cv::Mat& bgr) {
  Image out(bgr.cols, bgr.rows);
  cv::Mat dst(out.height(), out.width(), CV_8UC3, out.bytes().data());
  cv::cvtColor(bgr, dst, cv::COLOR_BGR2RGB);
  return out;
}

}  // namespace

Image resize(const Image& img, Size target) {
  if (target == img.size()) return img;
  if (target.width <= 0 || target.height <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "resize target must be positive");
  }
  Image out(target.width, target.height);
  cv::Mat dst(out.height(), out.width(), CV_8UC3, out.bytes().data());
  cv::resize(as_mat(img), dst, cv::Size(target.width, target.height), 0, 0, cv::INTER_AREA);
  return out;
}

Image cap_resolution(const Image& img, long long max_pixels) {
  return resize(img, capped_size(img.size(), max_pixels));
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  cv::Mat bgr;
  cv::cvtColor(as_mat(img), bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", bgr, buf)) throw Error(ErrorCode::IoError, "png encode failed");
  return buf;
}

std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.bytes().data()), img.bytes().size());
  return out;
}

namespace {

std::optional<Image> decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') return std::nullopt;
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    return any ? v : -1;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) return std::nullopt;
  ++pos;  // single whitespace before the raster
  const auto need = static_cast<std::size_t>(w * h * 3);
  if (bytes.size() < pos + need) return std::nullopt;
  Image img(static_cast<int>(w), static_cast<int>(h));
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), need, img.bytes().begin());
  return img;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (auto ppm = decode_ppm(bytes)) return *ppm;
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorCode::DecodeFailure, "cannot decode image bytes");
  return from_bgr(bgr);
}

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::AssetNotFound, path.string());
  const std::string data = read_file(path);
  try {
    return decode_image({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
  } catch (const Error&) {
    throw Error(ErrorCode::DecodeFailure, path.string());
  }
}

void write_image(const std::filesystem::path& path, const Image& img) {
  if (path.extension() == ".ppm") {
    write_file(path, encode_ppm(img));
    return;
  }
  const auto png = encode_png(img);
  write_file(path, {reinterpret_cast<const char*>(png.data()), png.size()});
}

std::string to_png_data_url(const Image& img) {
  return "data:image/png;base64," + base64_encode(encode_png(img));
}

}  // namespace vpa
