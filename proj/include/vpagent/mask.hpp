#pragma once

#include <cstdint>
#include <vector>

#include "vpagent/util.hpp"

namespace vpa {

struct Point {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// Binary raster, row-major, one byte per cell (0 or 1).
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  long long area() const { return static_cast<long long>(width_) * height_; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool at(int x, int y) const { return cells_[index(x, y)] != 0; }
  /// Out-of-raster cells read as unset.
  bool get(int x, int y) const { return contains(x, y) && at(x, y); }
  void set(int x, int y, bool v = true) { cells_[index(x, y)] = v ? 1 : 0; }

  long long count() const;
  bool empty() const { return count() == 0; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// {"w", "h", "counts"}: row-major alternating run lengths, starting with
/// a (possibly empty) run of zeros.
Json rle_encode(const Mask& mask);
/// Throws SchemaViolation unless the runs cover exactly w*h cells.
Mask rle_decode(const Json& rle);

struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Inclusive bounds of all set cells. Throws EmptyMask.
BBox mask_to_bbox(const Mask& mask);

/// 8-connected components, each listed in raster order; components are
/// ordered by their first cell in raster order.
std::vector<std::vector<Point>> connected_components(const Mask& mask);

/// The component with the most cells (earliest in raster order on ties).
/// Throws EmptyMask.
Mask largest_component(const Mask& mask);

struct Centroid {
  double x = 0;
  double y = 0;
};

/// Mean cell coordinate. Throws EmptyMask.
Centroid mask_centroid(const Mask& mask);

struct Contour {
  /// Closed boundary in tracing order; the first point is not repeated.
  std::vector<Point> points;
  bool is_hole = false;
};

/// Border following over 8-connected foreground / 4-connected background
/// (Suzuki-Abe). Returns every outer border and hole border; cells outside
/// the raster count as background. Throws EmptyMask.
std::vector<Contour> trace_contour(const Mask& mask);

}  // namespace vpa
