#pragma once

// Scene statistics that characterize irregular-shape datasets: Overlap of
// Sum over boxes or convex hulls, average MaxIoU, connected components per
// instance, minimum-rectangle aspect ratio and instance counts.

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "shapeseg/errors.hpp"
#include "shapeseg/raster.hpp"

namespace shapeseg {

/// 1 - |union| / sum |C_i| with areas counted in pixels; 0 for no regions
/// (or regions of zero total area).
inline double overlap_of_sum(const std::vector<BinaryMask>& regions) {
  if (regions.empty()) return 0.0;
  const int w = regions.front().width();
  const int h = regions.front().height();
  std::uint64_t sum = 0;
  std::uint64_t uni = 0;
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  for (const auto& r : regions) {
    if (!r.same_shape(w, h)) throw ContractError("overlap_of_sum regions must share one grid");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!r[i]) continue;
      ++sum;
      if (!covered[i]) {
        covered[i] = 1;
        ++uni;
      }
    }
  }
  return sum == 0 ? 0.0 : 1.0 - static_cast<double>(uni) / static_cast<double>(sum);
}

enum class RegionKind { bbox, convex };

/// Per-instance regions on the map's grid. Convex regions are the rasterized
/// hulls of pixel centers; a collinear (degenerate) hull has zero area.
inline std::vector<BinaryMask> instance_regions(const InstanceMap& map, RegionKind kind) {
  std::vector<BinaryMask> out;
  const auto pixels = instance_pixels(map);
  for (const auto& [id, px] : pixels) {
    if (px.empty()) continue;
    if (kind == RegionKind::bbox) {
      out.push_back(box_mask(bounding_box(px, map.width()), map.width(), map.height()));
      continue;
    }
    std::vector<Point> pts;
    pts.reserve(px.size());
    for (const auto p : px)
      pts.push_back({static_cast<int>(p % static_cast<std::uint32_t>(map.width())),
                     static_cast<int>(p / static_cast<std::uint32_t>(map.width()))});
    const auto hull = convex_hull(std::move(pts));
    if (hull.size() < 3)
      out.emplace_back(map.width(), map.height());
    else
      out.push_back(rasterize_polygon(hull_polygon(hull), map.width(), map.height()));
  }
  return out;
}

struct MaxIouResult {
  double value = 0.0;
  bool empty = false;  // the map had no instances
};

/// Mean over instances of the best bounding-box IoU against any other
/// instance.
inline MaxIouResult avg_max_iou(const InstanceMap& map) {
  const auto pixels = instance_pixels(map);
  const std::size_t n = pixels.size();
  if (n == 0) return {0.0, true};

  std::vector<Box> boxes;
  for (const auto& [_, px] : pixels) boxes.push_back(bounding_box(px, map.width()));
  std::vector<double> best(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double iou = box_iou(boxes[i], boxes[j]);
      best[i] = std::max(best[i], iou);
      best[j] = std::max(best[j], iou);
    }
  double acc = 0.0;
  for (const double b : best) acc += b;
  return {acc / static_cast<double>(n), false};
}

/// Mask-level variant over possibly overlapping (e.g. amodal) masks. Not
/// used by dataset reports, which follow the box convention.
inline MaxIouResult avg_max_mask_iou(const std::vector<BinaryMask>& masks) {
  const std::size_t n = masks.size();
  if (n == 0) return {0.0, true};
  std::vector<double> best(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!masks[i].same_shape(masks[j])) throw ContractError("masks differ in size");
      std::uint64_t inter = 0, uni = 0;
      for (std::size_t k = 0; k < masks[i].size(); ++k) {
        inter += (masks[i][k] && masks[j][k]) ? 1 : 0;
        uni += (masks[i][k] || masks[j][k]) ? 1 : 0;
      }
      const double iou = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
      best[i] = std::max(best[i], iou);
      best[j] = std::max(best[j], iou);
    }
  double acc = 0.0;
  for (const double b : best) acc += b;
  return {acc / static_cast<double>(n), false};
}

/// Connected-component count per instance, in id order.
inline std::vector<std::size_t> components_per_instance(const InstanceMap& map,
                                                        Connectivity conn = Connectivity::eight) {
  const auto cc = label_regions(map.labels, conn);
  std::vector<InstanceId> owner(cc.count + 1, 0);
  for (std::size_t i = 0; i < cc.labels.size(); ++i)
    if (const auto c = cc.labels[i]; c != 0) owner[c] = map.labels[i];
  std::map<InstanceId, std::size_t> per;
  for (const auto& [id, _] : map.classes) per[id] = 0;
  for (std::uint32_t c = 1; c <= cc.count; ++c) ++per[owner[c]];
  std::vector<std::size_t> out;
  for (const auto& [_, k] : per) out.push_back(k);
  return out;
}

/// Mean connected components per instance; 0 for an empty map.
inline double ccpi(const InstanceMap& map, Connectivity conn = Connectivity::eight) {
  const auto per = components_per_instance(map, conn);
  if (per.empty()) return 0.0;
  double acc = 0.0;
  for (const auto k : per) acc += static_cast<double>(k);
  return acc / static_cast<double>(per.size());
}

/// Minimum-area-rectangle aspect ratio per instance, in id order.
inline std::vector<double> aspect_ratios(const InstanceMap& map) {
  std::vector<double> out;
  for (const auto& [_, px] : instance_pixels(map)) {
    if (px.empty()) continue;
    std::vector<Point> pts;
    pts.reserve(px.size());
    for (const auto p : px)
      pts.push_back({static_cast<int>(p % static_cast<std::uint32_t>(map.width())),
                     static_cast<int>(p / static_cast<std::uint32_t>(map.width()))});
    out.push_back(min_area_rect(convex_hull(std::move(pts))).aspect_ratio());
  }
  return out;
}

/// Mean aspect ratio over instances; 0 for an empty map.
inline double aspect_ratio_stats(const InstanceMap& map) {
  const auto r = aspect_ratios(map);
  if (r.empty()) return 0.0;
  double acc = 0.0;
  for (const double v : r) acc += v;
  return acc / static_cast<double>(r.size());
}

/// Aggregated dataset statistics. OoS and MaxIoU are averaged per image
/// (MaxIoU over images with at least one instance); aspect ratio and CCPI
/// are averaged over instances.
struct DatasetReport {
  std::string name = "dataset";
  std::size_t images = 0;
  std::size_t instances = 0;
  double instances_per_image = 0.0;
  double oos_bbox = 0.0;
  double oos_convex = 0.0;
  double avg_max_iou = 0.0;
  double mean_aspect_ratio = 0.0;
  double ccpi = 0.0;
};

struct ImageStats {
  std::size_t instances = 0;
  double oos_bbox = 0.0;
  double oos_convex = 0.0;
  MaxIouResult max_iou;
  std::vector<std::size_t> components;
  std::vector<double> aspect;
};

inline ImageStats image_stats(const InstanceMap& map) {
  ImageStats s;
  s.instances = map.instance_count();
  s.oos_bbox = overlap_of_sum(instance_regions(map, RegionKind::bbox));
  s.oos_convex = overlap_of_sum(instance_regions(map, RegionKind::convex));
  s.max_iou = avg_max_iou(map);
  s.components = components_per_instance(map);
  s.aspect = aspect_ratios(map);
  return s;
}

inline DatasetReport reduce_stats(const std::vector<ImageStats>& per_image, std::string name = "dataset") {
  if (per_image.empty()) throw ParameterError("dataset_report needs at least one image");
  DatasetReport r;
  r.name = std::move(name);
  r.images = per_image.size();
  double oos_b = 0.0, oos_c = 0.0, iou = 0.0, aspect = 0.0, comps = 0.0;
  std::size_t iou_images = 0, n_aspect = 0, n_comp = 0;
  for (const auto& s : per_image) {
    r.instances += s.instances;
    oos_b += s.oos_bbox;
    oos_c += s.oos_convex;
    if (!s.max_iou.empty) {
      iou += s.max_iou.value;
      ++iou_images;
    }
    for (const double a : s.aspect) aspect += a;
    n_aspect += s.aspect.size();
    for (const auto c : s.components) comps += static_cast<double>(c);
    n_comp += s.components.size();
  }
  const double images = static_cast<double>(r.images);
  r.instances_per_image = static_cast<double>(r.instances) / images;
  r.oos_bbox = oos_b / images;
  r.oos_convex = oos_c / images;
  r.avg_max_iou = iou_images ? iou / static_cast<double>(iou_images) : 0.0;
  r.mean_aspect_ratio = n_aspect ? aspect / static_cast<double>(n_aspect) : 0.0;
  r.ccpi = n_comp ? comps / static_cast<double>(n_comp) : 0.0;
  return r;
}

inline DatasetReport dataset_report(const std::vector<InstanceMap>& maps, std::string name = "dataset") {
  if (maps.empty()) throw ParameterError("dataset_report needs at least one image");
  std::vector<ImageStats> per;
  per.reserve(maps.size());
  for (const auto& m : maps) per.push_back(image_stats(m));
  return reduce_stats(per, std::move(name));
}

// ---------------------------------------------------------------------------
// Report output

inline std::string report_to_text(const DatasetReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "# dataset statistics; oos_* and avg_max_iou averaged per image, aspect_ratio and ccpi per instance\n";
  os << "dataset=" << r.name << '\n'
     << "images=" << r.images << '\n'
     << "instances=" << r.instances << '\n'
     << "instances_per_image=" << r.instances_per_image << '\n'
     << "oos_bbox=" << r.oos_bbox << '\n'
     << "oos_convex=" << r.oos_convex << '\n'
     << "avg_max_iou=" << r.avg_max_iou << '\n'
     << "aspect_ratio=" << r.mean_aspect_ratio << '\n'
     << "ccpi=" << r.ccpi << '\n';
  return os.str();
}

inline constexpr const char* kReportCsvHeader =
    "Dataset,Images,Instances,Instances/image,OoS bbox,OoS convex,Average MaxIoU,Aspect ratio,CCPI";

inline std::string report_csv_row(const DatasetReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << r.name << ',' << r.images << ',' << r.instances << ',' << r.instances_per_image << ',' << r.oos_bbox << ','
     << r.oos_convex << ',' << r.avg_max_iou << ',' << r.mean_aspect_ratio << ',' << r.ccpi;
  return os.str();
}

inline std::string reports_to_csv(const std::vector<DatasetReport>& reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : reports) out += report_csv_row(r) + "\n";
  return out;
}

}  // namespace shapeseg
