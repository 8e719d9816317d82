#pragma once

// Seeded procedural scenes of irregular 2D shapes. Each family draws
// per-instance coverage masks from its own geometry rules; instances are
// composited in a random depth order so the topmost instance owns every
// pixel it covers. All randomness comes from counter streams keyed by
// (seed, attempt, slot), so an instance's geometry does not depend on how
// many values other instances consumed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shapeseg/errors.hpp"
#include "shapeseg/instance_io.hpp"
#include "shapeseg/parallel.hpp"
#include "shapeseg/png_io.hpp"
#include "shapeseg/raster.hpp"
#include "shapeseg/rng.hpp"

namespace shapeseg {

enum class Family { wire, antenna, hanger, fence, log, branch };

inline constexpr std::array<Family, 6> kAllFamilies{Family::wire,  Family::antenna, Family::hanger,
                                                    Family::fence, Family::log,     Family::branch};

inline std::string_view family_name(Family f) noexcept {
  switch (f) {
    case Family::wire: return "wire";
    case Family::antenna: return "antenna";
    case Family::hanger: return "hanger";
    case Family::fence: return "fence";
    case Family::log: return "log";
    case Family::branch: return "branch";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  for (const auto f : kAllFamilies)
    if (family_name(f) == name) return f;
  throw ParameterError("unknown scene family '" + std::string(name) + "'");
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const noexcept { return lo <= hi; }
};

struct FamilyParams {
  double wire_waviness = 0.06;      // curvature random-walk step, rad/px
  Range fence_pitch{22.0, 36.0};    // lattice spacing, px
  int branch_depth = 4;             // recursion levels below the trunk
  Range log_scale{0.45, 1.6};       // per-log size multiplier
};

struct SceneSpec {
  Family family = Family::wire;
  int width = 256;
  int height = 256;
  int instances_min = 1;
  int instances_max = 1;
  Range stroke_width{2.0, 4.0};
  std::uint64_t seed = 0;
  FamilyParams params;
  std::size_t min_visible_px = 32;

  void validate() const {
    if (width < 64 || height < 64) throw ParameterError("scene canvas must be at least 64x64");
    if (instances_min < 1 || instances_max < instances_min) throw ParameterError("bad instance count range");
    if (instances_max > 0xffff) throw ParameterError("too many instances for a 16-bit label map");
    if (!stroke_width.valid() || stroke_width.lo <= 0.0) throw ParameterError("bad stroke width range");
    if (!params.fence_pitch.valid() || params.fence_pitch.lo <= 0.0) throw ParameterError("bad fence pitch range");
    if (!params.log_scale.valid() || params.log_scale.lo <= 0.0) throw ParameterError("bad log scale range");
    if (params.branch_depth < 0 || params.branch_depth > 10) throw ParameterError("branch depth must be in [0, 10]");
    if (params.wire_waviness < 0.0) throw ParameterError("wire waviness must be >= 0");
  }
};

/// Family defaults, scaled linearly with the canvas (reference 256 px).
inline SceneSpec default_scene_spec(Family family, int width = 256, int height = 256, std::uint64_t seed = 0) {
  SceneSpec s;
  s.family = family;
  s.width = width;
  s.height = height;
  s.seed = seed;
  const double k = std::min(width, height) / 256.0;
  const auto scaled = [k](double lo, double hi) { return Range{lo * k, hi * k}; };
  switch (family) {
    case Family::wire:
      s.instances_min = 6, s.instances_max = 10;
      s.stroke_width = scaled(2.0, 3.5);
      break;
    case Family::antenna:
      s.instances_min = 5, s.instances_max = 10;
      s.stroke_width = scaled(2.5, 4.5);
      break;
    case Family::hanger:
      s.instances_min = 8, s.instances_max = 16;
      s.stroke_width = scaled(2.5, 4.0);
      break;
    case Family::fence:
      s.instances_min = 2, s.instances_max = 4;
      s.stroke_width = scaled(2.5, 4.0);
      break;
    case Family::log:
      s.instances_min = 14, s.instances_max = 26;
      s.stroke_width = scaled(5.0, 9.0);  // log thickness before the scale multiplier
      break;
    case Family::branch:
      s.instances_min = 5, s.instances_max = 10;
      s.stroke_width = scaled(3.0, 5.5);  // trunk width
      break;
  }
  s.params.fence_pitch = scaled(s.params.fence_pitch.lo, s.params.fence_pitch.hi);
  s.params.wire_waviness /= k;
  return s;
}

struct Scene {
  InstanceMap instance_map;
  SceneSpec spec;
  /// Unoccluded stroke of every kept instance.
  std::map<InstanceId, BinaryMask> amodal;
};

namespace detail {

/// Sets pixels whose centers lie within width/2 of segment ab.
inline void stamp_segment(BinaryMask& m, PointF a, PointF b, double width) {
  const double r = 0.5 * width;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r - 1)));
  const int x1 = std::min(m.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r - 1)));
  const int y1 = std::min(m.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r + 1)));
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5 - a.x, py = y + 0.5 - a.y;
      const double t = len2 > 0 ? std::clamp((px * dx + py * dy) / len2, 0.0, 1.0) : 0.0;
      const double ex = px - t * dx, ey = py - t * dy;
      if (ex * ex + ey * ey <= r * r) m(x, y) = 1;
    }
}

inline void stroke_polyline(BinaryMask& m, const std::vector<PointF>& pts, double width) {
  if (pts.size() == 1) stamp_segment(m, pts[0], pts[0], width);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) stamp_segment(m, pts[i], pts[i + 1], width);
}

inline PointF polar(PointF o, double len, double angle) {
  return {o.x + len * std::cos(angle), o.y + len * std::sin(angle)};
}

constexpr double kPi = std::numbers::pi;

inline BinaryMask draw_wire(const SceneSpec& spec, Stream& rng) {
  BinaryMask m(spec.width, spec.height);
  const double w = spec.width, h = spec.height;
  PointF p{rng.uniform(0.1, 0.9) * w, rng.uniform(0.1, 0.9) * h};
  double heading = rng.uniform(0.0, 2 * kPi);
  double curvature = 0.0;
  const double length = rng.uniform(1.0, 2.2) * std::min(w, h);
  const double width = rng.uniform(spec.stroke_width.lo, spec.stroke_width.hi);
  const double step = 2.0;
  std::vector<PointF> pts{p};
  for (double s = 0; s < length; s += step) {
    curvature = 0.92 * curvature + spec.params.wire_waviness * rng.normal() * 0.35;
    heading += curvature * step;
    p = polar(p, step, heading);
    // Reflect at the canvas border so wires stay in frame.
    if (p.x < 2 || p.x > w - 2) {
      heading = kPi - heading;
      p.x = std::clamp(p.x, 2.0, w - 2);
    }
    if (p.y < 2 || p.y > h - 2) {
      heading = -heading;
      p.y = std::clamp(p.y, 2.0, h - 2);
    }
    pts.push_back(p);
  }
  stroke_polyline(m, pts, width);
  return m;
}

inline BinaryMask draw_antenna(const SceneSpec& spec, Stream& rng) {
  BinaryMask m(spec.width, spec.height);
  const double size = std::min(spec.width, spec.height);
  PointF p{rng.uniform(0.1, 0.9) * spec.width, rng.uniform(0.1, 0.9) * spec.height};
  double heading = rng.uniform(0.0, 2 * kPi);
  const double length = rng.uniform(0.35, 0.75) * size;
  const double width = rng.uniform(spec.stroke_width.lo, spec.stroke_width.hi);
  const int bends = rng.uniform_int(0, 2);
  std::vector<double> cuts{0.0, 1.0};
  for (int b = 0; b < bends; ++b) cuts.push_back(rng.uniform(0.2, 0.8));
  std::sort(cuts.begin(), cuts.end());
  std::vector<PointF> pts{p};
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    if (i > 1) heading += (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.15, 0.7);
    p = polar(p, (cuts[i] - cuts[i - 1]) * length, heading);
    pts.push_back(p);
  }
  stroke_polyline(m, pts, width);
  // Connector base: a short thick stub at the start.
  stamp_segment(m, pts[0], polar(pts[0], 0.06 * length, heading + kPi), width * 2.2);
  return m;
}

inline BinaryMask draw_hanger(const SceneSpec& spec, Stream& rng) {
  BinaryMask m(spec.width, spec.height);
  const double size = std::min(spec.width, spec.height);
  const double scale = rng.uniform(0.16, 0.32) * size;
  const double angle = rng.uniform(0.0, 2 * kPi);
  const PointF c{rng.uniform(0.05, 0.95) * spec.width, rng.uniform(0.05, 0.95) * spec.height};
  const double width = rng.uniform(spec.stroke_width.lo, spec.stroke_width.hi);

  // Template in unit coordinates, y down: triangle body, neck, hook.
  std::vector<PointF> body{{0.0, -0.1}, {1.0, 0.45}, {-1.0, 0.45}, {0.0, -0.1}, {0.0, -0.35}};
  std::vector<PointF> hook;
  for (int i = 0; i <= 16; ++i) {
    const double t = kPi - i * (kPi + kPi / 3.0) / 16.0;
    hook.push_back({0.14 + 0.14 * std::cos(t), -0.35 - 0.14 * std::sin(t)});
  }
  const double ca = std::cos(angle), sa = std::sin(angle);
  const auto place = [&](std::vector<PointF> pts) {
    for (auto& q : pts) q = {c.x + scale * (ca * q.x - sa * q.y), c.y + scale * (sa * q.x + ca * q.y)};
    return pts;
  };
  stroke_polyline(m, place(body), width);
  stroke_polyline(m, place(hook), width);
  return m;
}

inline BinaryMask draw_fence(const SceneSpec& spec, Stream& rng) {
  BinaryMask m(spec.width, spec.height);
  const double pitch = rng.uniform(spec.params.fence_pitch.lo, spec.params.fence_pitch.hi);
  const double width = rng.uniform(spec.stroke_width.lo, spec.stroke_width.hi);
  const double a0 = rng.uniform(0.0, kPi);
  const double a1 = a0 + rng.uniform(kPi / 3.0, kPi / 2.0);
  const double reach = std::hypot(spec.width, spec.height);
  const PointF center{0.5 * spec.width, 0.5 * spec.height};
  for (const double a : {a0, a1}) {
    const double phase = rng.uniform(0.0, pitch);
    const PointF dir{std::cos(a), std::sin(a)};
    const PointF nrm{-dir.y, dir.x};
    for (double off = -reach / 2 + phase; off <= reach / 2; off += pitch) {
      const PointF mid{center.x + nrm.x * off, center.y + nrm.y * off};
      stamp_segment(m, {mid.x - dir.x * reach, mid.y - dir.y * reach}, {mid.x + dir.x * reach, mid.y + dir.y * reach},
                    width);
    }
  }
  return m;
}

/// Logs share a dominant orientation per scene; see generate_scene.
inline BinaryMask draw_log(const SceneSpec& spec, Stream& rng, double dominant_angle) {
  BinaryMask m(spec.width, spec.height);
  const double size = std::min(spec.width, spec.height);
  const double scale = rng.uniform(spec.params.log_scale.lo, spec.params.log_scale.hi);
  const double thickness = scale * rng.uniform(spec.stroke_width.lo, spec.stroke_width.hi);
  const double length = std::min(thickness * rng.uniform(12.0, 30.0), 1.2 * size);
  const double angle = dominant_angle + 0.3 * rng.normal();
  const PointF c{rng.uniform(0.0, 1.0) * spec.width, rng.uniform(0.0, 1.0) * spec.height};
  const double taper = rng.uniform(0.8, 1.0);  // far end appears thinner
  const PointF dir{std::cos(angle), std::sin(angle)};
  const PointF nrm{-dir.y, dir.x};
  const PointF a{c.x - dir.x * length / 2, c.y - dir.y * length / 2};
  const PointF b{c.x + dir.x * length / 2, c.y + dir.y * length / 2};
  const double ha = thickness / 2, hb = taper * thickness / 2;
  const Polygon quad{{a.x + nrm.x * ha, a.y + nrm.y * ha},
                     {b.x + nrm.x * hb, b.y + nrm.y * hb},
                     {b.x - nrm.x * hb, b.y - nrm.y * hb},
                     {a.x - nrm.x * ha, a.y - nrm.y * ha}};
  return rasterize_polygon(quad, spec.width, spec.height);
}

inline void grow_branch(BinaryMask& m, Stream& rng, PointF from, double heading, double length, double width,
                        int depth) {
  // Each limb bends slightly halfway.
  const PointF mid = polar(from, length / 2, heading);
  const double bent = heading + rng.uniform(-0.25, 0.25);
  const PointF end = polar(mid, length / 2, bent);
  stamp_segment(m, from, mid, width);
  stamp_segment(m, mid, end, width * 0.85);
  if (depth == 0) return;
  for (const double side : {-1.0, 1.0}) {
    const double spread = rng.uniform(0.3, 0.8);
    grow_branch(m, rng, end, bent + side * spread, length * rng.uniform(0.6, 0.8), std::max(1.5, width * 0.72),
                depth - 1);
  }
}

inline BinaryMask draw_branch(const SceneSpec& spec, Stream& rng) {
  BinaryMask m(spec.width, spec.height);
  const double size = std::min(spec.width, spec.height);
  const PointF root{rng.uniform(0.1, 0.9) * spec.width, rng.uniform(0.1, 0.9) * spec.height};
  const double heading = rng.uniform(0.0, 2 * kPi);
  const double width = rng.uniform(spec.stroke_width.lo, spec.stroke_width.hi);
  grow_branch(m, rng, root, heading, rng.uniform(0.14, 0.24) * size, width, spec.params.branch_depth);
  return m;
}

}  // namespace detail

/// Draws one scene. Instances with fewer than `min_visible_px` visible
/// pixels after occlusion are dropped; survivors are renumbered 1..K in draw
/// slot order with depth ranks 0..K-1. Throws GenerationError if fewer than
/// `instances_min` survive after a bounded number of attempts.
namespace detail {

inline BinaryMask largest_component(const BinaryMask& m) {
  auto parts = connected_components(m);
  if (parts.size() < 2) return m;
  return *std::max_element(parts.begin(), parts.end(),
                           [](const BinaryMask& a, const BinaryMask& b) { return a.count() < b.count(); });
}

}  // namespace detail

inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  constexpr int kAttempts = 16;
  const auto fam = static_cast<std::uint64_t>(spec.family);

  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Stream scene_rng(hash_combine(spec.seed, fam, 0x5ce7e000ULL + static_cast<std::uint64_t>(attempt)));
    const int count = scene_rng.uniform_int(spec.instances_min, spec.instances_max);
    const double dominant = scene_rng.uniform(0.0, detail::kPi);

    // Depth ranks: a seeded permutation of the slots.
    std::vector<int> depth(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) depth[static_cast<std::size_t>(i)] = i;
    for (int i = count - 1; i > 0; --i) std::swap(depth[static_cast<std::size_t>(i)], depth[static_cast<std::size_t>(scene_rng.uniform_int(0, i))]);

    std::vector<BinaryMask> cover;
    cover.reserve(static_cast<std::size_t>(count));
    for (int slot = 0; slot < count; ++slot) {
      BinaryMask m;
      for (int redraw = 0; redraw < 8; ++redraw) {
        Stream rng(hash_combine(spec.seed, hash_combine(fam, static_cast<std::uint64_t>(attempt)),
                                (static_cast<std::uint64_t>(slot) << 8) | static_cast<std::uint64_t>(redraw)));
        switch (spec.family) {
          case Family::wire: m = detail::draw_wire(spec, rng); break;
          case Family::antenna: m = detail::draw_antenna(spec, rng); break;
          case Family::hanger: m = detail::draw_hanger(spec, rng); break;
          case Family::fence: m = detail::draw_fence(spec, rng); break;
          case Family::log: m = detail::draw_log(spec, rng, dominant); break;
          case Family::branch: m = detail::draw_branch(spec, rng); break;
        }
        m = detail::largest_component(m);  // canvas clipping can cut a stroke
        if (m.count() >= spec.min_visible_px) break;
      }
      cover.push_back(std::move(m));
    }

    // Paint bottom to top.
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(depth[static_cast<std::size_t>(i)])] = i;
    Grid<std::uint32_t> owner(spec.width, spec.height, 0);
    for (const int slot : order)
      for (std::size_t p = 0; p < owner.size(); ++p)
        if (cover[static_cast<std::size_t>(slot)][p]) owner[p] = static_cast<std::uint32_t>(slot) + 1;

    std::vector<std::size_t> visible(static_cast<std::size_t>(count) + 1, 0);
    for (const auto o : owner) ++visible[o];
    std::vector<InstanceId> new_id(static_cast<std::size_t>(count) + 1, 0);
    std::vector<std::pair<int, InstanceId>> ranks;
    InstanceId next = 0;
    for (int slot = 0; slot < count; ++slot)
      if (visible[static_cast<std::size_t>(slot) + 1] >= spec.min_visible_px) {
        new_id[static_cast<std::size_t>(slot) + 1] = ++next;
        ranks.emplace_back(depth[static_cast<std::size_t>(slot)], next);
      }
    if (static_cast<int>(next) < spec.instances_min) continue;

    Scene scene{InstanceMap(spec.width, spec.height), spec, {}};
    for (std::size_t p = 0; p < owner.size(); ++p) scene.instance_map.labels[p] = new_id[owner[p]];
    for (int slot = 0; slot < count; ++slot)
      if (const auto id = new_id[static_cast<std::size_t>(slot) + 1]; id != 0)
        scene.amodal.emplace(id, std::move(cover[static_cast<std::size_t>(slot)]));
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t r = 0; r < ranks.size(); ++r) {
      scene.instance_map.classes[ranks[r].second] = 1;
      scene.instance_map.depth_order[ranks[r].second] = static_cast<int>(r);
    }
    return scene;
  }
  throw GenerationError("could not place " + std::to_string(spec.instances_min) + " visible " +
                        std::string(family_name(spec.family)) + " instances after " + std::to_string(kAttempts) +
                        " attempts");
}

/// Grayscale rendering: flat per-instance tone plus seeded noise.
inline PngImage render_scene_image(const Scene& scene) {
  const auto& map = scene.instance_map;
  PngImage img{map.width(), map.height(), 1, 8, std::vector<std::uint16_t>(map.labels.size())};
  const CounterRng rng(hash_combine(scene.spec.seed, 0x1a9eULL));
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const auto id = map.labels[i];
    const double tone = id == 0 ? 40.0 : 150.0 + 60.0 * to_unit(mix64(id));
    img.samples[i] = static_cast<std::uint16_t>(std::clamp(std::lround(tone + 6.0 * rng.normal(i)), 0L, 255L));
  }
  return img;
}

// ---------------------------------------------------------------------------
// Suites

struct ManifestRow {
  Family family = Family::wire;
  std::string path;  // relative to the suite directory
  std::uint64_t seed = 0;
  std::size_t instances = 0;
  int width = 0;
  int height = 0;
};

inline constexpr const char* kManifestHeader = "family,path,seed,instances,width,height";

inline std::string manifest_to_csv(const std::vector<ManifestRow>& rows) {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  for (const auto& r : rows)
    os << family_name(r.family) << ',' << r.path << ',' << r.seed << ',' << r.instances << ',' << r.width << ','
       << r.height << '\n';
  return os.str();
}

inline std::vector<ManifestRow> manifest_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader) throw FormatError("manifest header mismatch");
  std::vector<ManifestRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (cols.size() != 6) throw FormatError("manifest row needs 6 columns: " + line);
    ManifestRow r;
    r.family = parse_family(cols[0]);
    r.path = cols[1];
    r.seed = std::stoull(cols[2]);
    r.instances = static_cast<std::size_t>(parse_int(cols[3]));
    r.width = static_cast<int>(parse_int(cols[4]));
    r.height = static_cast<int>(parse_int(cols[5]));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::uint64_t scene_seed(std::uint64_t base_seed, Family family, std::size_t index) {
  return hash_combine(base_seed, static_cast<std::uint64_t>(family) + 1, index) >> 1;
}

struct SuiteOptions {
  std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
  std::size_t scenes_per_family = 50;
  std::uint64_t base_seed = 0;
  int width = 256;
  int height = 256;
  bool write_images = false;
  unsigned threads = 1;
};

/// Spec of the i-th scene of a family in a suite.
inline SceneSpec suite_scene_spec(const SuiteOptions& opt, Family f, std::size_t index) {
  return default_scene_spec(f, opt.width, opt.height, scene_seed(opt.base_seed, f, index));
}

inline std::string scene_file_name(Family f, std::size_t index) {
  std::ostringstream os;
  os << family_name(f) << '_' << std::setw(4) << std::setfill('0') << index << ".png";
  return os.str();
}

/// Writes `<out>/<family>/<family>_NNNN.png` (+ sidecar, + optional
/// `_image.png`) for every scene and `<out>/manifest.csv`.
inline std::vector<ManifestRow> generate_suite(const SuiteOptions& opt, const std::filesystem::path& out_dir) {
  std::vector<std::pair<Family, std::size_t>> jobs;
  for (const auto f : opt.families) {
    const auto dir = out_dir / std::string(family_name(f));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < opt.scenes_per_family; ++i) jobs.emplace_back(f, i);
  }
  std::vector<ManifestRow> rows(jobs.size());
  parallel_for(jobs.size(), opt.threads, [&](std::size_t j) {
    const auto [f, i] = jobs[j];
    const auto spec = suite_scene_spec(opt, f, i);
    const auto scene = generate_scene(spec);
    const auto name = scene_file_name(f, i);
    const auto dir = out_dir / std::string(family_name(f));
    save_instance_map(dir / name, scene.instance_map,
                      {{"family", std::string(family_name(f))}, {"seed", std::to_string(spec.seed)}});
    if (opt.write_images) {
      auto img_path = dir / name;
      img_path.replace_extension();
      img_path += "_image.png";
      save_png(img_path, render_scene_image(scene));
    }
    rows[j] = {f, std::string(family_name(f)) + "/" + name, spec.seed, scene.instance_map.instance_count(),
               spec.width, spec.height};
  });
  write_file_atomic(out_dir / "manifest.csv", manifest_to_csv(rows));
  return rows;
}

}  // namespace shapeseg
