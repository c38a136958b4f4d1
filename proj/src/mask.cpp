#include "vpagent/mask.hpp"

#include <array>
#include <deque>
#include <numeric>
#include <tuple>

#include "vpagent/error.hpp"

namespace vpa {

Mask::Mask(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::DimensionMismatch, "negative mask size");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

long long Mask::count() const { return std::count(cells_.begin(), cells_.end(), std::uint8_t{1}); }

Json rle_encode(const Mask& mask) {
  Json counts = Json::array();
  std::uint8_t current = 0;
  long long run = 0;
  for (auto c : mask.cells()) {
    if (c != current) {
      counts.push_back(run);
      current = c;
      run = 0;
    }
    ++run;
  }
  counts.push_back(run);
  return {{"w", mask.width()}, {"h", mask.height()}, {"counts", std::move(counts)}};
}

Mask rle_decode(const Json& rle) {
  try {
    const int w = rle.at("w").get<int>();
    const int h = rle.at("h").get<int>();
    if (w < 0 || h < 0) throw Error(ErrorCode::SchemaViolation, "negative RLE size");
    Mask mask(w, h);
    const auto total = mask.area();
    long long pos = 0;
    bool value = false;
    for (const auto& c : rle.at("counts")) {
      const auto n = c.get<long long>();
      if (n < 0) throw Error(ErrorCode::SchemaViolation, "negative RLE run");
      if (pos + n > total) throw Error(ErrorCode::SchemaViolation, "RLE runs exceed " + std::to_string(total) + " cells");
      if (value) {
        for (long long k = pos; k < pos + n; ++k) mask.set(static_cast<int>(k % w), static_cast<int>(k / w));
      }
      pos += n;
      value = !value;
    }
    if (pos != total) {
      throw Error(ErrorCode::SchemaViolation,
                  "RLE covers " + std::to_string(pos) + " cells, expected " + std::to_string(total));
    }
    return mask;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("RLE record: ") + e.what());
  }
}

BBox mask_to_bbox(const Mask& mask) {
  BBox b{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (b.x1 < 0) throw Error(ErrorCode::EmptyMask, "mask has no set cells");
  return b;
}

std::vector<std::vector<Point>> connected_components(const Mask& mask) {
  std::vector<std::vector<Point>> out;
  std::vector<std::uint8_t> seen(mask.cells().size(), 0);
  const auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * mask.width() + x; };
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || seen[idx(x, y)]) continue;
      std::vector<Point> comp;
      std::deque<Point> queue{{x, y}};
      seen[idx(x, y)] = 1;
      while (!queue.empty()) {
        const auto p = queue.front();
        queue.pop_front();
        comp.push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (!mask.get(nx, ny) || seen[idx(nx, ny)]) continue;
            seen[idx(nx, ny)] = 1;
            queue.push_back({nx, ny});
          }
        }
      }
      std::sort(comp.begin(), comp.end(), [](Point a, Point b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
      out.push_back(std::move(comp));
    }
  }
  return out;
}

Mask largest_component(const Mask& mask) {
  const auto comps = connected_components(mask);
  if (comps.empty()) throw Error(ErrorCode::EmptyMask, "mask has no set cells");
  std::size_t best = 0;
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].size() > comps[best].size()) best = i;
  }
  Mask out(mask.width(), mask.height());
  for (const auto& p : comps[best]) out.set(p.x, p.y);
  return out;
}

Centroid mask_centroid(const Mask& mask) {
  double sx = 0;
  double sy = 0;
  long long n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "mask has no set cells");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

namespace {

// Clockwise in image coordinates (y grows downward), starting east.
constexpr std::array<std::array<int, 2>, 8> kDirs = {
    {{0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};

int direction(int i, int j, int p, int q) {
  for (int k = 0; k < 8; ++k) {
    if (kDirs[k][0] == p - i && kDirs[k][1] == q - j) return k;
  }
  return 0;
}

class BorderFollower {
 public:
  explicit BorderFollower(const Mask& mask) : rows_(mask.height() + 2), cols_(mask.width() + 2) {
    f_.assign(static_cast<std::size_t>(rows_) * cols_, 0);
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) f(y + 1, x + 1) = mask.at(x, y) ? 1 : 0;
    }
  }

  std::vector<Contour> run() {
    std::vector<Contour> out;
    int nbd = 1;
    for (int i = 1; i < rows_ - 1; ++i) {
      for (int j = 1; j < cols_ - 1; ++j) {
        if (f(i, j) == 1 && f(i, j - 1) == 0) {
          out.push_back({follow(i, j, i, j - 1, ++nbd), false});
        } else if (f(i, j) >= 1 && f(i, j + 1) == 0) {
          out.push_back({follow(i, j, i, j + 1, ++nbd), true});
        }
      }
    }
    return out;
  }

 private:
  int& f(int i, int j) { return f_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::vector<Point> follow(int i, int j, int i2, int j2, int nbd) {
    std::vector<Point> pts;
    const int d0 = direction(i, j, i2, j2);
    int i1 = -1;
    int j1 = -1;
    for (int s = 0; s < 8; ++s) {
      const int k = (d0 + s) % 8;
      if (f(i + kDirs[k][0], j + kDirs[k][1]) != 0) {
        i1 = i + kDirs[k][0];
        j1 = j + kDirs[k][1];
        break;
      }
    }
    if (i1 < 0) {
      f(i, j) = -nbd;
      pts.push_back({j - 1, i - 1});
      return pts;
    }
    i2 = i1;
    j2 = j1;
    int i3 = i;
    int j3 = j;
    for (;;) {
      const int d = direction(i3, j3, i2, j2);
      bool east_zero = false;
      int i4 = i2;
      int j4 = j2;
      for (int s = 1; s <= 8; ++s) {
        const int k = ((d - s) % 8 + 8) % 8;
        const int p = i3 + kDirs[k][0];
        const int q = j3 + kDirs[k][1];
        if (f(p, q) != 0) {
          i4 = p;
          j4 = q;
          break;
        }
        if (k == 0) east_zero = true;
      }
      if (east_zero) f(i3, j3) = -nbd;
      else if (f(i3, j3) == 1) f(i3, j3) = nbd;
      pts.push_back({j3 - 1, i3 - 1});
      if (i4 == i && j4 == j && i3 == i1 && j3 == j1) break;
      i2 = i3;
      j2 = j3;
      i3 = i4;
      j3 = j4;
    }
    return pts;
  }

  int rows_;
  int cols_;
  std::vector<int> f_;
};

}  // namespace

std::vector<Contour> trace_contour(const Mask& mask) {
  if (mask.empty()) throw Error(ErrorCode::EmptyMask, "mask has no set cells");
  return BorderFollower(mask).run();
}

}  // namespace vpa
