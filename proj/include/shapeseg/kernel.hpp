#pragma once

// Affinity kernels: the ordered set of pixel offsets at which same-instance
// affinities are derived. The asymmetric kernel keeps one representative of
// every +/- offset pair (the half-plane dy > 0, or dy == 0 and dx > 0) and
// samples concentric rings around a dense core.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "shapeseg/errors.hpp"
#include "shapeseg/raster.hpp"

namespace shapeseg {

struct Offset {
  int dy = 0;
  int dx = 0;

  double norm() const noexcept { return std::hypot(static_cast<double>(dy), static_cast<double>(dx)); }
  Offset operator-() const noexcept { return {-dy, -dx}; }
  auto operator<=>(const Offset&) const = default;
};

/// True for the canonical member of a +/- pair.
constexpr bool in_half_plane(Offset o) noexcept { return o.dy > 0 || (o.dy == 0 && o.dx > 0); }

struct AffinityKernel {
  std::vector<Offset> offsets;  // sorted by (dy, dx); channel i <-> offsets[i]
  int radius = 1;
  int gap = 1;
  bool symmetric = false;

  std::size_t size() const noexcept { return offsets.size(); }

  /// Throws ContractError if any documented invariant is violated.
  void validate() const {
    if (radius < 1 || gap < 1) throw ContractError("kernel radius and gap must be >= 1");
    if (!std::is_sorted(offsets.begin(), offsets.end()) ||
        std::adjacent_find(offsets.begin(), offsets.end()) != offsets.end())
      throw ContractError("kernel offsets must be unique and sorted");
    const std::set<Offset> lookup(offsets.begin(), offsets.end());
    for (const auto& o : offsets) {
      if (o == Offset{}) throw ContractError("kernel contains the zero offset");
      if (o.norm() > radius + 0.5) throw ContractError("kernel offset exceeds radius");
      if (symmetric && !lookup.contains(-o)) throw ContractError("symmetric kernel not closed under negation");
      if (!symmetric && !in_half_plane(o)) throw ContractError("asymmetric kernel offset outside the half-plane");
    }
  }

  bool operator==(const AffinityKernel&) const = default;
};

namespace detail {

inline void check_kernel_params(int radius, int gap) {
  if (radius < 1) throw ParameterError("kernel radius must be >= 1, got " + std::to_string(radius));
  if (gap < 1) throw ParameterError("neighbor gap must be >= 1, got " + std::to_string(gap));
}

inline std::set<Offset> half_plane_offsets(int radius, int gap) {
  std::set<Offset> out;
  const auto add_disk = [&](int r) {
    for (int dy = 0; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (Offset o{dy, dx}; in_half_plane(o) && dy * dy + dx * dx <= r * r) out.insert(o);
  };
  add_disk(std::min(2, radius));
  // A gap of one pixel is the dense limit: every offset within the radius.
  if (gap == 1) add_disk(radius);

  for (int ring = 2 + gap; ring <= radius; ring += gap) {
    const double step = static_cast<double>(gap) / ring;
    const int samples = static_cast<int>(std::ceil(std::numbers::pi / step - 1e-9));
    for (int j = 0; j < samples; ++j) {
      const double theta = j * step;
      const Offset o{static_cast<int>(std::lround(ring * std::sin(theta))),
                     static_cast<int>(std::lround(ring * std::cos(theta)))};
      if (in_half_plane(o) && o.norm() <= radius + 0.5) out.insert(o);
    }
  }
  return out;
}

}  // namespace detail

/// Asymmetric semicircle kernel: a dense core of every half-plane offset with
/// norm <= min(2, radius), plus rings at radii 2+g, 2+2g, ... <= radius whose
/// points are spaced roughly g pixels apart along the arc.
inline AffinityKernel generate_asis_kernel(int radius, int gap) {
  detail::check_kernel_params(radius, gap);
  const auto set = detail::half_plane_offsets(radius, gap);
  return {{set.begin(), set.end()}, radius, gap, false};
}

/// Centrosymmetric counterpart: the asymmetric kernel plus the negation of
/// every offset.
inline AffinityKernel generate_symmetric_kernel(int radius, int gap) {
  detail::check_kernel_params(radius, gap);
  auto set = detail::half_plane_offsets(radius, gap);
  std::vector<Offset> mirrored;
  for (const auto& o : set) mirrored.push_back(-o);
  set.insert(mirrored.begin(), mirrored.end());
  return {{set.begin(), set.end()}, radius, gap, true};
}

/// Keeps the half-plane representative of every +/- pair.
inline AffinityKernel deduplicate_symmetric(const AffinityKernel& kernel) {
  if (!kernel.symmetric) throw ContractError("deduplicate_symmetric needs a symmetric kernel");
  const std::set<Offset> lookup(kernel.offsets.begin(), kernel.offsets.end());
  AffinityKernel out{{}, kernel.radius, kernel.gap, false};
  for (const auto& o : kernel.offsets) {
    if (!lookup.contains(-o)) throw ContractError("kernel flagged symmetric is not closed under negation");
    if (in_half_plane(o)) out.offsets.push_back(o);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset-adaptive parameters

struct DatasetGapStats {
  /// Per fragmented instance: the smallest radius that links all of its
  /// connected components (largest edge of the minimum spanning tree over
  /// component-to-component pixel-center distances). For two components this
  /// is the distance between them.
  std::vector<double> gaps;
  /// Per instance: median stroke thickness in pixels.
  std::vector<double> thicknesses;

  bool empty() const noexcept { return gaps.empty() && thicknesses.empty(); }
};

struct InstanceGeometry {
  std::size_t components = 0;
  double gap = 0.0;  // 0 when the instance is a single component
  double thickness = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}


/// Upper half-plane offsets with squared norm in (0, r^2], by squared norm.
inline std::vector<std::pair<int, Offset>> offsets_by_norm(int radius) {
  std::vector<std::pair<int, Offset>> out;
  for (int dy = 0; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const int n2 = dy * dy + dx * dx;
      if (n2 > 0 && n2 <= radius * radius && (dy > 0 || dx > 0)) out.push_back({n2, {dy, dx}});
    }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

/// Squared bottleneck distance linking all components of a labelled grid
/// (the largest edge of the minimum spanning tree over closest pixel-center
/// pairs). Short links come from an offset sweep over boundary pixels;
/// whatever is still disconnected after that is joined exactly through one
/// distance transform per remaining group.
inline double spanning_gap_sq(const Grid<std::uint32_t>& labels, std::size_t count) {
  if (count < 2) return 0.0;
  constexpr int kSweep = 24;
  static const auto sweep = offsets_by_norm(kSweep);
  const int w = labels.width(), h = labels.height();

  // Closest pairs always sit on pixels with an 8-neighbour outside their set.
  std::vector<Point> boundary;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!labels(x, y)) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || labels(nx, ny) != labels(x, y)) {
            edge = true;
            break;
          }
        }
      if (edge) boundary.push_back({x, y});
    }

  UnionFind uf(count);
  std::size_t groups = count;
  double bottleneck = 0.0;
  for (std::size_t i = 0; i < sweep.size() && groups > 1;) {
    const int n2 = sweep[i].first;
    std::size_t j = i;
    for (; j < sweep.size() && sweep[j].first == n2; ++j)
      for (const auto p : boundary) {
        const int nx = p.x + sweep[j].second.dx, ny = p.y + sweep[j].second.dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const auto a = labels(p.x, p.y), b = labels(nx, ny);
        if (!b || a == b) continue;
        const auto ra = uf.find(a - 1), rb = uf.find(b - 1);
        if (ra == rb) continue;
        uf.unite(ra, rb);
        --groups;
        bottleneck = n2;
      }
    i = j;
  }
  if (groups == 1) return bottleneck;

  // Remaining links are longer than the sweep; Prim over groups with exact
  // closest-pair distances.
  std::vector<std::uint32_t> group_of(count);
  std::vector<std::uint32_t> roots;
  for (std::uint32_t c = 0; c < count; ++c) {
    const auto r = uf.find(c);
    if (r == c) roots.push_back(c);
  }
  for (std::uint32_t c = 0; c < count; ++c)
    group_of[c] = static_cast<std::uint32_t>(std::lower_bound(roots.begin(), roots.end(), uf.find(c)) - roots.begin());
  const std::size_t k = roots.size();
  std::vector<double> dist(k * k, std::numeric_limits<double>::infinity());
  BinaryMask comp(w, h);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = labels[i] && group_of[labels[i] - 1] == g ? 1 : 0;
    const auto dt = squared_distance_transform(comp);
    for (const auto p : boundary) {
      const auto other = group_of[labels(p.x, p.y) - 1];
      if (other == g) continue;
      auto& slot = dist[g * k + other];
      slot = std::min(slot, dt(p.x, p.y));
    }
  }
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  std::vector<bool> in_tree(k, false);
  best[0] = 0.0;
  for (std::size_t it = 0; it < k; ++it) {
    std::size_t u = k;
    for (std::size_t v = 0; v < k; ++v)
      if (!in_tree[v] && (u == k || best[v] < best[u])) u = v;
    in_tree[u] = true;
    bottleneck = std::max(bottleneck, best[u]);
    for (std::size_t v = 0; v < k; ++v)
      if (!in_tree[v]) best[v] = std::min(best[v], std::min(dist[u * k + v], dist[v * k + u]));
  }
  return bottleneck;
}

}  // namespace detail

/// Component count, spanning gap and stroke thickness of one instance.
/// Thickness is 2 x (median distance-to-background over ridge pixels) - 1,
/// where ridge pixels are local maxima of the distance-to-background field;
/// a solid bar of width w measures w.
inline InstanceGeometry measure_instance(const InstanceMap& map, InstanceId id,
                                         Connectivity conn = Connectivity::eight) {
  const auto pixels = [&] {
    std::vector<std::uint32_t> px;
    for (std::size_t i = 0; i < map.labels.size(); ++i)
      if (map.labels[i] == id) px.push_back(static_cast<std::uint32_t>(i));
    return px;
  }();
  InstanceGeometry geo;
  if (pixels.empty()) return geo;

  // Work on the bounding box padded by one pixel of background.
  const Box box = bounding_box(pixels, map.width());
  const int w = box.width() + 2;
  const int h = box.height() + 2;
  BinaryMask local(w, h);
  for (const auto p : pixels) {
    const int x = static_cast<int>(p % static_cast<std::uint32_t>(map.width()));
    const int y = static_cast<int>(p / static_cast<std::uint32_t>(map.width()));
    local(x - box.x0 + 1, y - box.y0 + 1) = 1;
  }

  BinaryMask background(w, h);
  for (std::size_t i = 0; i < local.size(); ++i) background[i] = local[i] ? 0 : 1;
  const auto to_bg = squared_distance_transform(background);
  std::vector<double> ridge;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      if (!local(x, y)) continue;
      const double d = to_bg(x, y);
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (to_bg(x + dx, y + dy) > d) {
            is_max = false;
            break;
          }
      if (is_max) ridge.push_back(std::sqrt(d));
    }
  geo.thickness = std::max(1.0, 2.0 * detail::median(ridge) - 1.0);

  const auto cc = label_components(local, conn);
  geo.components = cc.count;
  if (cc.count < 2) return geo;

  geo.gap = std::sqrt(detail::spanning_gap_sq(cc.labels, cc.count));
  return geo;
}

/// Collects gap and thickness statistics over at most `sample_limit`
/// instances (0 = unlimited), visiting maps in order and instances by id.
inline DatasetGapStats measure_gap_stats(const std::vector<InstanceMap>& maps, std::size_t sample_limit = 0) {
  if (maps.empty()) throw ParameterError("measure_gap_stats needs at least one map");
  DatasetGapStats stats;
  std::size_t seen = 0;
  for (const auto& map : maps) {
    for (const auto& [id, _] : map.classes) {
      if (sample_limit != 0 && seen >= sample_limit) return stats;
      ++seen;
      const auto geo = measure_instance(map, id);
      if (geo.components == 0) continue;
      stats.thicknesses.push_back(geo.thickness);
      if (geo.components >= 2) stats.gaps.push_back(geo.gap);
    }
  }
  return stats;
}

struct KernelParams {
  int radius = 2;
  int gap = 1;
  bool operator==(const KernelParams&) const = default;
};

struct AdaptOptions {
  double coverage = 0.95;
  std::size_t neighbor_budget = 64;
  int max_radius = 64;
};

/// r_k covers the `coverage` quantile of observed gaps (nearest rank); without
/// fragmented instances it falls back to twice the median thickness. g is
/// the smallest gap whose kernel fits the neighbor budget.
inline KernelParams adapt_kernel_params(const DatasetGapStats& stats, const AdaptOptions& opt = {}) {
  if (stats.empty()) throw ParameterError("adapt_kernel_params needs nonempty stats");
  if (!(opt.coverage > 0.0 && opt.coverage <= 1.0)) throw ParameterError("coverage must be in (0, 1]");
  if (opt.max_radius < 2) throw ParameterError("max radius must be >= 2");

  double want;
  if (!stats.gaps.empty()) {
    auto g = stats.gaps;
    std::sort(g.begin(), g.end());
    const auto rank = static_cast<std::size_t>(std::ceil(opt.coverage * static_cast<double>(g.size())));
    want = std::ceil(g[std::clamp<std::size_t>(rank, 1, g.size()) - 1] - 1e-9);
  } else {
    want = 2.0 * detail::median(stats.thicknesses);
  }
  KernelParams p;
  p.radius = static_cast<int>(std::clamp(want, 2.0, static_cast<double>(opt.max_radius)));
  for (p.gap = 1; p.gap < p.radius; ++p.gap)
    if (generate_asis_kernel(p.radius, p.gap).size() <= opt.neighbor_budget) break;
  return p;
}

// ---------------------------------------------------------------------------
// Text serialization: header `asis-kernel v1 r_k=<int> g=<int> sym=<0|1>`,
// then one `dy dx` pair per line.

inline std::string kernel_to_string(const AffinityKernel& k) {
  std::ostringstream os;
  os << "asis-kernel v1 r_k=" << k.radius << " g=" << k.gap << " sym=" << (k.symmetric ? 1 : 0) << '\n';
  for (const auto& o : k.offsets) os << o.dy << ' ' << o.dx << '\n';
  return os.str();
}

inline AffinityKernel kernel_from_string(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("kernel file is empty");
  AffinityKernel k;
  int sym = -1;
  {
    std::istringstream hs(line);
    std::string magic, version, rk, g, s;
    hs >> magic >> version >> rk >> g >> s;
    if (magic != "asis-kernel" || version != "v1") throw FormatError("not an asis-kernel v1 file");
    try {
      if (rk.rfind("r_k=", 0) != 0 || g.rfind("g=", 0) != 0 || s.rfind("sym=", 0) != 0) throw FormatError("");
      k.radius = std::stoi(rk.substr(4));
      k.gap = std::stoi(g.substr(2));
      sym = std::stoi(s.substr(4));
    } catch (const std::exception&) {
      throw FormatError("malformed kernel header: " + line);
    }
    if (sym != 0 && sym != 1) throw FormatError("kernel sym flag must be 0 or 1");
    k.symmetric = sym == 1;
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Offset o;
    std::string rest;
    if (!(ls >> o.dy >> o.dx) || (ls >> rest)) throw FormatError("malformed kernel offset line: " + line);
    k.offsets.push_back(o);
  }
  try {
    k.validate();
  } catch (const ContractError& e) {
    throw FormatError(std::string("invalid kernel: ") + e.what());
  }
  return k;
}

inline void save_kernel(const std::string& path, const AffinityKernel& k) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << kernel_to_string(k);
  if (!os) throw IoError("write failed: " + path);
}

inline AffinityKernel load_kernel(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return kernel_from_string(ss.str());
}

}  // namespace shapeseg
