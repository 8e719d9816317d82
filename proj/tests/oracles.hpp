#pragma once

// Brute-force reference implementations. Deliberately naive: they share no
// code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "shapeseg/eval.hpp"
#include "shapeseg/raster.hpp"

namespace oracle {

using namespace shapeseg;

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double p) {
  BinaryMask m(w, h);
  std::bernoulli_distribution on(p);
  for (auto& v : m) v = on(rng) ? 1 : 0;
  return m;
}

/// Random labeling with `k` instances, each of class 1..classes.
inline InstanceMap random_instances(std::mt19937_64& rng, int w, int h, int k, double fill, int classes = 1) {
  InstanceMap map(w, h);
  std::uniform_int_distribution<int> pick(1, k);
  std::bernoulli_distribution on(fill);
  for (auto& v : map.labels) v = on(rng) ? static_cast<InstanceId>(pick(rng)) : 0;
  std::uniform_int_distribution<int> cls(1, classes);
  for (auto v : map.labels)
    if (v) map.classes.emplace(v, 0);
  for (auto& [id, c] : map.classes) c = static_cast<ClassId>(cls(rng));
  return map;
}

/// Random axis-aligned rectangles painted in order, later ones on top.
inline InstanceMap random_boxes(std::mt19937_64& rng, int w, int h, int k) {
  InstanceMap map(w, h);
  for (int i = 1; i <= k; ++i) {
    std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
    int x0 = xs(rng), x1 = xs(rng), y0 = ys(rng), y1 = ys(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) map.labels(x, y) = static_cast<InstanceId>(i);
  }
  for (auto v : map.labels)
    if (v) map.classes[v] = 1;
  return map;
}

inline std::vector<std::pair<int, int>> neighbor_steps(Connectivity c) {
  if (c == Connectivity::four) return {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  return {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
}

/// Breadth-first flood fill; returns per-pixel component numbers (0 = off)
/// numbered in row-major order of each component's first pixel.
inline std::vector<int> flood_labels(const BinaryMask& m, Connectivity c, int& count) {
  std::vector<int> lab(m.size(), 0);
  count = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y) || lab[m.index(x, y)]) continue;
      ++count;
      std::deque<std::pair<int, int>> q{{x, y}};
      lab[m.index(x, y)] = count;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop_front();
        for (auto [dx, dy] : neighbor_steps(c)) {
          const int nx = cx + dx, ny = cy + dy;
          if (!m.test(nx, ny) || lab[m.index(nx, ny)]) continue;
          lab[m.index(nx, ny)] = count;
          q.push_back({nx, ny});
        }
      }
    }
  return lab;
}

inline int flood_count(const BinaryMask& m, Connectivity c) {
  int n = 0;
  flood_labels(m, c, n);
  return n;
}

inline Box scan_box(const BinaryMask& m) {
  Box b{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

/// Gift wrapping over distinct points; keeps only strict corners.
inline std::set<Point> gift_wrap(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 2) return {pts.begin(), pts.end()};
  const auto cross = [](Point o, Point a, Point b) {
    return static_cast<long long>(a.x - o.x) * (b.y - o.y) - static_cast<long long>(a.y - o.y) * (b.x - o.x);
  };
  const auto d2 = [](Point a, Point b) {
    return static_cast<long long>(a.x - b.x) * (a.x - b.x) + static_cast<long long>(a.y - b.y) * (a.y - b.y);
  };
  const Point start = *std::min_element(pts.begin(), pts.end());
  std::set<Point> hull;
  Point cur = start;
  do {
    hull.insert(cur);
    Point next = pts[0] == cur ? pts[1] : pts[0];
    for (const auto& p : pts) {
      if (p == cur) continue;
      const auto c = cross(cur, next, p);
      if (c < 0 || (c == 0 && d2(cur, p) > d2(cur, next))) next = p;
    }
    cur = next;
  } while (!(cur == start) && hull.size() <= pts.size());
  // Drop collinear points that slipped in (none expected when farthest wins).
  return hull;
}

inline bool point_in_convex(const Polygon& poly, double x, double y, double eps = 1e-9) {
  if (poly.size() == 1) return std::abs(poly[0].x - x) < eps && std::abs(poly[0].y - y) < eps;
  if (poly.size() == 2) {
    const double cx = (poly[1].x - poly[0].x) * (y - poly[0].y) - (poly[1].y - poly[0].y) * (x - poly[0].x);
    const bool within = std::min(poly[0].x, poly[1].x) - eps <= x && x <= std::max(poly[0].x, poly[1].x) + eps &&
                        std::min(poly[0].y, poly[1].y) - eps <= y && y <= std::max(poly[0].y, poly[1].y) + eps;
    return std::abs(cx) < eps && within;
  }
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < -eps) return false;
  }
  return true;
}

inline double shoelace(const Polygon& p) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return std::abs(s) / 2;
}

/// Smallest center-span rectangle area over 360 directions in 0.5 degree steps.
inline double swept_span_area(const std::vector<Point>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 360; ++k) {
    const double t = k * 0.5 * std::acos(-1.0) / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
    for (const auto& p : pts) {
      const double u = p.x * c + p.y * s, v = -p.x * s + p.y * c;
      u0 = std::min(u0, u), u1 = std::max(u1, u), v0 = std::min(v0, v), v1 = std::max(v1, v);
    }
    best = std::min(best, (u1 - u0) * (v1 - v0));
  }
  return best;
}

inline Grid<double> brute_sq_distance(const BinaryMask& m) {
  Grid<double> out(m.width(), m.height(), std::numeric_limits<double>::infinity());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      for (int qy = 0; qy < m.height(); ++qy)
        for (int qx = 0; qx < m.width(); ++qx)
          if (m(qx, qy)) out(x, y) = std::min(out(x, y), double((x - qx) * (x - qx) + (y - qy) * (y - qy)));
  return out;
}

/// Overlap of sum from a per-pixel coverage histogram.
inline double oos(const std::vector<BinaryMask>& regions) {
  if (regions.empty()) return 0.0;
  std::vector<int> cover(regions[0].size(), 0);
  for (const auto& r : regions)
    for (std::size_t i = 0; i < r.size(); ++i) cover[i] += r[i] ? 1 : 0;
  long long uni = 0, sum = 0;
  for (const int c : cover) {
    uni += c > 0;
    sum += c;
  }
  return sum == 0 ? 0.0 : 1.0 - double(uni) / double(sum);
}

inline std::vector<BinaryMask> bbox_regions(const InstanceMap& map) {
  std::vector<BinaryMask> out;
  for (const auto& [id, _] : map.classes) {
    const auto b = scan_box(map.mask_of(id));
    BinaryMask r(map.width(), map.height());
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) r(x, y) = 1;
    out.push_back(std::move(r));
  }
  return out;
}

/// Pixel-counted IoU of two masks.
inline double count_iou(const BinaryMask& a, const BinaryMask& b) {
  long long i = 0, u = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    i += a[k] && b[k];
    u += a[k] || b[k];
  }
  return u ? double(i) / double(u) : 0.0;
}

/// Mean over instances of the best box IoU against any other instance,
/// boxes compared by pixel counting on a canvas large enough for both.
inline double max_iou(const InstanceMap& map) {
  const auto boxes = bbox_regions(map);
  if (boxes.size() < 2) return 0.0;
  double acc = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double best = 0;
    for (std::size_t j = 0; j < boxes.size(); ++j)
      if (i != j) best = std::max(best, count_iou(boxes[i], boxes[j]));
    acc += best;
  }
  return acc / double(boxes.size());
}

inline double ccpi(const InstanceMap& map) {
  if (map.classes.empty()) return 0.0;
  double acc = 0;
  for (const auto& [id, _] : map.classes) acc += flood_count(map.mask_of(id), Connectivity::eight);
  return acc / double(map.classes.size());
}

/// Bottleneck of the minimum spanning tree over components, with component
/// distances taken as the minimum over all pixel-center pairs.
inline double spanning_gap(const BinaryMask& m) {
  int n = 0;
  const auto lab = flood_labels(m, Connectivity::eight, n);
  if (n < 2) return 0.0;
  std::vector<std::vector<std::pair<int, int>>> px(n);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (const int l = lab[m.index(x, y)]) px[l - 1].push_back({x, y});
  std::vector<std::vector<double>> d(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      for (auto [ax, ay] : px[a])
        for (auto [bx, by] : px[b]) d[a][b] = std::min(d[a][b], std::hypot(double(ax - bx), double(ay - by)));
      d[b][a] = d[a][b];
    }
  std::vector<bool> in(n, false);
  std::vector<double> key(n, std::numeric_limits<double>::infinity());
  key[0] = 0;
  double bottleneck = 0;
  for (int it = 0; it < n; ++it) {
    int u = -1;
    for (int v = 0; v < n; ++v)
      if (!in[v] && (u < 0 || key[v] < key[u])) u = v;
    in[u] = true;
    bottleneck = std::max(bottleneck, key[u]);
    for (int v = 0; v < n; ++v)
      if (!in[v]) key[v] = std::min(key[v], d[u][v]);
  }
  return bottleneck;
}

struct Det {
  BinaryMask mask;
  ClassId cls;
  double confidence;
};

/// AP straight from the definition: rank by confidence (stable), greedily
/// match each detection to the best unmatched same-class GT with IoU >= t,
/// then average, over the 101 recall levels, the best precision reached at
/// any rank whose recall meets the level.
inline double ap_definition(const std::vector<Det>& dets, const InstanceMap& gt, ClassId cls, double t) {
  std::vector<BinaryMask> gts;
  for (const auto& [id, c] : gt.classes)
    if (c == cls) gts.push_back(gt.mask_of(id));
  if (gts.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].cls == cls) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  std::vector<bool> used(gts.size(), false);
  std::vector<double> prec, rec;
  int tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    int best = -1;
    double best_iou = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double iou = count_iou(dets[order[r]].mask, gts[g]);
      if (iou >= t && iou > best_iou) best = int(g), best_iou = iou;
    }
    if (best >= 0) used[best] = true, ++tp;
    prec.push_back(double(tp) / double(r + 1));
    rec.push_back(double(tp) / double(gts.size()));
  }
  double acc = 0;
  for (int k = 0; k <= 100; ++k) {
    double p = 0;
    for (std::size_t r = 0; r < prec.size(); ++r)
      if (rec[r] >= k / 100.0 - 1e-12) p = std::max(p, prec[r]);
    acc += p;
  }
  return acc / 101.0;
}

/// Class-averaged AP of one image at one threshold.
inline double ap_image(const std::vector<Det>& dets, const InstanceMap& gt, double t) {
  std::set<ClassId> classes;
  for (const auto& [_, c] : gt.classes) classes.insert(c);
  double acc = 0;
  for (const auto c : classes) acc += ap_definition(dets, gt, c, t);
  return acc / double(classes.size());
}

}  // namespace oracle
