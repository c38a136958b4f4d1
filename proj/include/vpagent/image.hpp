#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vpa {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Size {
  int width = 0;
  int height = 0;
  friend bool operator==(const Size&, const Size&) = default;
  long long area() const { return static_cast<long long>(width) * height; }
};

/// 8-bit interleaved RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  Size size() const { return {width_, height_}; }
  long long area() const { return size().area(); }
  bool empty() const { return width_ == 0 || height_ == 0; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  /// Writes only when (x, y) is inside the raster.
  void plot(int x, int y, Rgb c) {
    if (contains(x, y)) set(x, y, c);
  }

  std::span<const std::uint8_t> bytes() const { return pixels_; }
  std::span<std::uint8_t> bytes() { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Largest aspect-preserving size with area <= max_pixels. Never upscales.
Size capped_size(Size in, long long max_pixels);

/// Area-averaging downscale.
Image resize(const Image& img, Size target);
Image cap_resolution(const Image& img, long long max_pixels);

std::vector<std::uint8_t> encode_png(const Image& img);
std::string encode_ppm(const Image& img);
Image decode_image(std::span<const std::uint8_t> bytes);

/// Format chosen by extension: .ppm is written/parsed natively, everything
/// else goes through the codec backend.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

std::string to_png_data_url(const Image& img);

}  // namespace vpa
