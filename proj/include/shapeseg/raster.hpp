#pragma once

// Dense 2D label/mask primitives and the geometric reductions built on them:
// connected components, boxes, convex hulls, minimum-area rectangles,
// polygon rasterization, distance transforms and run-length coding.
//
// Coordinate convention: pixel (x, y) covers [x, x+1) x [y, y+1) and its
// center is (x + 0.5, y + 0.5). Hulls and rectangles are built over
// pixel centers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "shapeseg/errors.hpp"

namespace shapeseg {

using InstanceId = std::uint32_t;
using ClassId = std::uint32_t;

template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_dim(width)) * static_cast<std::size_t>(checked_dim(height)), fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(int width, int height) const noexcept { return width_ == width && height_ == height; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return same_shape(other.width(), other.height());
  }

  bool operator==(const Grid&) const = default;

 private:
  static int checked_dim(int d) {
    if (d < 0) throw ParameterError("negative grid dimension");
    return d;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Per-pixel membership flags (0 or 1).
class BinaryMask : public Grid<std::uint8_t> {
 public:
  using Grid::Grid;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count_if(begin(), end(), [](std::uint8_t v) { return v != 0; }));
  }
  bool any() const noexcept {
    return std::any_of(begin(), end(), [](std::uint8_t v) { return v != 0; });
  }
  bool test(int x, int y) const noexcept { return contains(x, y) && (*this)(x, y) != 0; }
  void set(int x, int y) noexcept {
    if (contains(x, y)) (*this)(x, y) = 1;
  }
};

struct Point {
  int x = 0;
  int y = 0;
  auto operator<=>(const Point&) const = default;
};

struct PointF {
  double x = 0.0;
  double y = 0.0;
};

using Polygon = std::vector<PointF>;

/// Axis-aligned pixel box, bounds inclusive.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;

  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  std::int64_t area() const noexcept {
    return (x1 < x0 || y1 < y0) ? 0 : static_cast<std::int64_t>(width()) * height();
  }
  bool operator==(const Box&) const = default;
};

inline double box_iou(const Box& a, const Box& b) noexcept {
  const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const auto i = inter.area();
  const auto u = a.area() + b.area() - i;
  return u > 0 ? static_cast<double>(i) / static_cast<double>(u) : 0.0;
}

inline BinaryMask box_mask(const Box& box, int width, int height) {
  BinaryMask m(width, height);
  for (int y = std::max(0, box.y0); y <= std::min(height - 1, box.y1); ++y)
    for (int x = std::max(0, box.x0); x <= std::min(width - 1, box.x1); ++x) m(x, y) = 1;
  return m;
}

/// Minimum-area rectangle. Extents are measured in pixels: the span of the
/// covered pixel centers plus one pixel footprint along each axis.
struct RotatedRect {
  PointF center;
  double long_side = 1.0;
  double short_side = 1.0;
  double angle = 0.0;  // direction of the long side, radians in [0, pi)

  double area() const noexcept { return long_side * short_side; }
  double aspect_ratio() const noexcept { return long_side / std::max(short_side, 1.0); }
};

/// Dense instance labels plus the id -> class table.
struct InstanceMap {
  Grid<InstanceId> labels;
  std::map<InstanceId, ClassId> classes;
  /// Optional draw depth per instance; larger values are drawn on top.
  std::map<InstanceId, int> depth_order;

  InstanceMap() = default;
  InstanceMap(int width, int height) : labels(width, height, 0) {}

  int width() const noexcept { return labels.width(); }
  int height() const noexcept { return labels.height(); }
  std::size_t instance_count() const noexcept { return classes.size(); }

  /// Throws FormatError when a label lacks a class entry, a class entry
  /// names an absent instance, a class id is 0, or depth entries are
  /// inconsistent.
  void validate() const {
    std::map<InstanceId, bool> seen;
    for (auto id : labels)
      if (id != 0) seen[id] = true;
    for (const auto& [id, _] : seen)
      if (!classes.contains(id)) throw FormatError("instance " + std::to_string(id) + " has no class entry");
    for (const auto& [id, cls] : classes) {
      if (id == 0) throw FormatError("instance id 0 is reserved for background");
      if (cls == 0) throw FormatError("instance " + std::to_string(id) + " has class 0");
      if (!seen.contains(id)) throw FormatError("class entry for absent instance " + std::to_string(id));
    }
    if (!depth_order.empty()) {
      for (const auto& [id, _] : classes)
        if (!depth_order.contains(id)) throw FormatError("instance " + std::to_string(id) + " has no depth");
      if (depth_order.size() != classes.size()) throw FormatError("depth entries for absent instances");
    }
  }

  std::vector<InstanceId> instance_ids() const {
    std::vector<InstanceId> ids;
    ids.reserve(classes.size());
    for (const auto& [id, _] : classes) ids.push_back(id);
    return ids;
  }

  BinaryMask mask_of(InstanceId id) const {
    BinaryMask m(width(), height());
    for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == id ? 1 : 0;
    return m;
  }

  BinaryMask foreground() const {
    BinaryMask m(width(), height());
    for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] != 0 ? 1 : 0;
    return m;
  }
};

/// Pixel index lists per instance id, ascending row-major within each list.
inline std::map<InstanceId, std::vector<std::uint32_t>> instance_pixels(const InstanceMap& map) {
  std::map<InstanceId, std::vector<std::uint32_t>> out;
  for (const auto& [id, _] : map.classes) out[id];
  for (std::size_t i = 0; i < map.labels.size(); ++i)
    if (const auto id = map.labels[i]; id != 0) out[id].push_back(static_cast<std::uint32_t>(i));
  return out;
}

/// C class probabilities per pixel (channel 0 is background), pixel-major.
class SemanticMap {
 public:
  SemanticMap() = default;
  SemanticMap(int width, int height, int channels)
      : width_(width), height_(height), channels_(channels),
        probs_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(channels), 0.0f) {
    if (width < 0 || height < 0 || channels < 1) throw ParameterError("bad semantic map shape");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }

  std::span<float> at(std::size_t pixel) noexcept {
    return {probs_.data() + pixel * static_cast<std::size_t>(channels_), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> at(std::size_t pixel) const noexcept {
    return {probs_.data() + pixel * static_cast<std::size_t>(channels_), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> at(int x, int y) const noexcept {
    return at(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x));
  }

  /// Lowest channel index among the maxima.
  int argmax(std::size_t pixel) const noexcept {
    const auto p = at(pixel);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  /// Pixels whose argmax is a non-background class.
  BinaryMask foreground() const {
    BinaryMask m(width_, height_);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = argmax(i) != 0 ? 1 : 0;
    return m;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> probs_;
};

enum class Connectivity { four, eight };

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

  std::uint32_t add() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) noexcept {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  /// Roots at the smaller index so the root of a set is its earliest member.
  void unite(std::uint32_t a, std::uint32_t b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b)
      parent_[b] = a;
    else
      parent_[a] = b;
  }
  std::size_t size() const noexcept { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace detail

/// Component id per pixel (0 = unset, 1..count) for a multi-label image:
/// two pixels join when they carry the same nonzero value and are adjacent.
/// Components are numbered in order of their first pixel in row-major scan.
struct ComponentLabels {
  Grid<std::uint32_t> labels;
  std::uint32_t count = 0;
};

template <typename T>
ComponentLabels label_regions(const Grid<T>& image, Connectivity conn) {
  const int w = image.width();
  const int h = image.height();
  Grid<std::uint32_t> prov(w, h, 0);
  detail::UnionFind uf(1);  // slot 0 is the background sentinel

  const auto link = [&](int x, int y, int nx, int ny, std::uint32_t& cur) {
    if (!image.contains(nx, ny)) return;
    if (image(nx, ny) != image(x, y)) return;
    const auto other = prov(nx, ny);
    if (cur == 0)
      cur = other;
    else if (other != cur)
      uf.unite(cur, other);
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (image(x, y) == T{}) continue;
      std::uint32_t cur = 0;
      link(x, y, x - 1, y, cur);
      link(x, y, x, y - 1, cur);
      if (conn == Connectivity::eight) {
        link(x, y, x - 1, y - 1, cur);
        link(x, y, x + 1, y - 1, cur);
      }
      prov(x, y) = cur != 0 ? cur : uf.add();
    }
  }

  ComponentLabels out{Grid<std::uint32_t>(w, h, 0), 0};
  std::vector<std::uint32_t> final_id(uf.size(), 0);
  for (std::size_t i = 0; i < prov.size(); ++i) {
    if (prov[i] == 0) continue;
    const auto root = uf.find(prov[i]);
    if (final_id[root] == 0) final_id[root] = ++out.count;
    out.labels[i] = final_id[root];
  }
  return out;
}

inline ComponentLabels label_components(const BinaryMask& mask, Connectivity conn) {
  return label_regions<std::uint8_t>(mask, conn);
}

/// Components ordered by their smallest row-major pixel.
inline std::vector<BinaryMask> connected_components(const BinaryMask& mask, Connectivity conn = Connectivity::eight) {
  const auto cc = label_components(mask, conn);
  std::vector<BinaryMask> out(cc.count, BinaryMask(mask.width(), mask.height()));
  for (std::size_t i = 0; i < cc.labels.size(); ++i)
    if (const auto c = cc.labels[i]; c != 0) out[c - 1][i] = 1;
  return out;
}

inline Box bounding_box(const BinaryMask& mask) {
  Box b{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  if (b.x1 < 0) throw EmptyMaskError("bounding_box");
  return b;
}

/// Bounding box of pixel indices on a grid of the given width.
inline Box bounding_box(std::span<const std::uint32_t> pixels, int width) {
  if (pixels.empty()) throw EmptyMaskError("bounding_box");
  Box b{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
  for (const auto p : pixels) {
    const int x = static_cast<int>(p % static_cast<std::uint32_t>(width));
    const int y = static_cast<int>(p / static_cast<std::uint32_t>(width));
    b.x0 = std::min(b.x0, x);
    b.y0 = std::min(b.y0, y);
    b.x1 = std::max(b.x1, x);
    b.y1 = std::max(b.y1, y);
  }
  return b;
}

inline double polygon_area(const Polygon& poly) noexcept {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    acc += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
  return 0.5 * acc;
}

/// Convex hull of integer points (Andrew's monotone chain), counterclockwise
/// in the x-right / y-up sense, without collinear vertices. Collinear input
/// yields its two extreme points; a single distinct point yields itself.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return pts;

  const auto cross = [](const Point& o, const Point& a, const Point& b) {
    return static_cast<std::int64_t>(a.x - o.x) * (b.y - o.y) - static_cast<std::int64_t>(a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline std::vector<Point> mask_points(const BinaryMask& mask) {
  std::vector<Point> pts;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y)) pts.push_back({x, y});
  return pts;
}

/// Hull vertices on pixel-center coordinates.
inline Polygon hull_polygon(const std::vector<Point>& hull) {
  Polygon poly;
  poly.reserve(hull.size());
  for (const auto& p : hull) poly.push_back({p.x + 0.5, p.y + 0.5});
  return poly;
}

/// Convex hull of the set pixel centers, counterclockwise.
inline Polygon convex_hull(const BinaryMask& mask) {
  auto pts = mask_points(mask);
  if (pts.empty()) throw EmptyMaskError("convex_hull");
  return hull_polygon(convex_hull(std::move(pts)));
}

/// Rotating calipers over the hull of integer points. Minimizes the area of
/// the center-span rectangle, then adds the one-pixel footprint to each
/// extent.
inline RotatedRect min_area_rect(const std::vector<Point>& hull_in) {
  if (hull_in.empty()) throw EmptyMaskError("min_area_rect");
  const auto hull = convex_hull(hull_in);
  if (hull.size() == 1) return {{hull[0].x + 0.5, hull[0].y + 0.5}, 1.0, 1.0, 0.0};

  double best_area = std::numeric_limits<double>::infinity();
  RotatedRect best;
  const std::size_t n = hull.size();
  const std::size_t edges = n == 2 ? 1 : n;
  for (std::size_t i = 0; i < edges; ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % n];
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double len = std::hypot(ex, ey);
    const double ux = ex / len, uy = ey / len;
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : hull) {
      const double u = p.x * ux + p.y * uy;
      const double v = -p.x * uy + p.y * ux;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    const double su = umax - umin;
    const double sv = vmax - vmin;
    const double area = su * sv;
    if (area < best_area - 1e-9) {
      best_area = area;
      const double cu = 0.5 * (umin + umax);
      const double cv = 0.5 * (vmin + vmax);
      best.center = {cu * ux - cv * uy + 0.5, cu * uy + cv * ux + 0.5};
      double angle;
      if (su >= sv) {
        best.long_side = su + 1.0;
        best.short_side = sv + 1.0;
        angle = std::atan2(uy, ux);
      } else {
        best.long_side = sv + 1.0;
        best.short_side = su + 1.0;
        angle = std::atan2(ux, -uy);
      }
      angle = std::fmod(angle, std::numbers::pi);
      if (angle < 0) angle += std::numbers::pi;
      best.angle = angle;
    }
  }
  return best;
}

inline RotatedRect min_area_rect(const BinaryMask& mask) {
  auto pts = mask_points(mask);
  if (pts.empty()) throw EmptyMaskError("min_area_rect");
  return min_area_rect(convex_hull(std::move(pts)));
}

/// Sets every pixel whose center lies inside the polygon (even-odd rule) or
/// on its boundary.
inline BinaryMask rasterize_polygon(const Polygon& poly, int width, int height) {
  BinaryMask mask(width, height);
  if (poly.empty()) return mask;
  for (const auto& p : poly)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ParameterError("non-finite polygon vertex");

  constexpr double eps = 1e-9;
  const std::size_t n = poly.size();
  const auto fill_span = [&](int y, double xa, double xb) {
    const int lo = std::max(0, static_cast<int>(std::ceil(xa - 0.5 - eps)));
    const int hi = std::min(width - 1, static_cast<int>(std::floor(xb - 0.5 + eps)));
    for (int x = lo; x <= hi; ++x) mask(x, y) = 1;
  };

  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const auto& a = poly[j];
      const auto& b = poly[i];
      // Interior crossings with the half-open rule.
      if ((a.y <= yc) != (b.y <= yc)) xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      // Boundary: centers lying on this edge.
      const double ylo = std::min(a.y, b.y), yhi = std::max(a.y, b.y);
      if (yc < ylo - eps || yc > yhi + eps) continue;
      if (std::abs(b.y - a.y) <= eps) {
        fill_span(y, std::min(a.x, b.x), std::max(a.x, b.x));
      } else {
        const double xe = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
        fill_span(y, xe, xe);
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) fill_span(y, xs[k], xs[k + 1]);
  }
  return mask;
}

/// Squared Euclidean distance (pixel units) from every pixel to the nearest
/// set pixel of `mask`; infinity when the mask is empty. Exact separable
/// lower-envelope transform.
inline Grid<double> squared_distance_transform(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Grid<double> out(w, h, inf);
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[i] = 0.0;

  const auto pass = [](std::span<double> f) {
    const int n = static_cast<int>(f.size());
    std::vector<double> d(f.size());
    std::vector<int> v(f.size());
    std::vector<double> z(f.size() + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
      if (f[q] == inf) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -inf;
        z[1] = inf;
        continue;
      }
      double s;
      while (true) {
        const int p = v[k];
        s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
        if (s <= z[k] && k > 0)
          --k;
        else
          break;
      }
      if (s <= z[k]) {
        v[k] = q;  // k == 0 and the new parabola dominates everywhere
        z[k + 1] = inf;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = inf;
    }
    if (k < 0) return;
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (z[j + 1] < q) ++j;
      const double dq = q - v[j];
      d[q] = dq * dq + f[v[j]];
    }
    std::copy(d.begin(), d.end(), f.begin());
  };

  std::vector<double> col(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = out(x, y);
    pass(col);
    for (int y = 0; y < h; ++y) out(x, y) = col[y];
  }
  for (int y = 0; y < h; ++y) pass(out.data().subspan(out.index(0, y), static_cast<std::size_t>(w)));
  return out;
}

/// Run-length code of a mask in row-major order: alternating run lengths of
/// 0s and 1s, beginning with a (possibly empty) 0-run.
inline std::vector<std::uint32_t> rle_encode(const BinaryMask& mask) {
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t len = 0;
  for (const auto v : mask) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit != current) {
      runs.push_back(len);
      len = 0;
      current = bit;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

inline BinaryMask rle_decode(std::span<const std::uint32_t> runs, int width, int height) {
  BinaryMask mask(width, height);
  std::size_t pos = 0;
  std::uint8_t bit = 0;
  for (const auto run : runs) {
    if (pos + run > mask.size()) throw FormatError("run-length code exceeds mask size");
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(pos), run, bit);
    pos += run;
    bit ^= 1;
  }
  if (pos != mask.size()) throw FormatError("run-length code does not cover the mask");
  return mask;
}

inline std::string rle_to_string(std::span<const std::uint32_t> runs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < runs.size(); ++i) os << (i ? " " : "") << runs[i];
  return os.str();
}

inline std::vector<std::uint32_t> rle_from_string(const std::string& text) {
  std::vector<std::uint32_t> runs;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
      throw FormatError("bad run length '" + tok + "'");
    runs.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
  }
  return runs;
}

}  // namespace shapeseg
