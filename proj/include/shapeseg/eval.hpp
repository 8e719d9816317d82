#pragma once

// COCO-style mask average precision: greedy confidence-ordered matching and
// 101-point interpolated precision-recall area, averaged over IoU
// thresholds 0.50:0.05:0.95 and over the classes present in ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "shapeseg/errors.hpp"
#include "shapeseg/graph_merge.hpp"
#include "shapeseg/raster.hpp"

namespace shapeseg {

struct Detection {
  BinaryMask mask;
  ClassId cls = 1;
  double confidence = 1.0;
};

inline std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.50 + 0.05 * i);
  return t;
}

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  bool class_aware = true;

  void validate() const {
    if (iou_thresholds.empty()) throw ParameterError("no IoU thresholds");
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
      const double t = iou_thresholds[i];
      if (!(t > 0.0 && t < 1.0)) throw ParameterError("IoU thresholds must lie in (0, 1)");
      if (i > 0 && !(t > iou_thresholds[i - 1])) throw ParameterError("IoU thresholds must increase strictly");
    }
  }
};

/// |a & b| / |a | b|; 0 when both are empty.
inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ContractError("mask_iou on masks of different size");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// One instance per detection, in instance id order.
inline std::vector<Detection> detections_from(const SegmentationResult& seg) {
  std::vector<Detection> out;
  for (const auto& [id, cls] : seg.instance_map.classes) {
    const auto conf = seg.confidences.find(id);
    out.push_back({seg.instance_map.mask_of(id), cls, conf == seg.confidences.end() ? 1.0 : conf->second});
  }
  return out;
}

struct EvalImage {
  std::vector<Detection> detections;
  InstanceMap ground_truth;
};

struct EvalSummary {
  std::vector<double> thresholds;
  /// Class-averaged AP per threshold.
  std::vector<double> ap;
  /// Per class, AP per threshold.
  std::map<ClassId, std::vector<double>> class_ap;
  /// Mean of `ap`; nullopt when no ground-truth instance exists.
  std::optional<double> mmap;
};

namespace detail {

/// IoU of every detection against every ground-truth instance of one image.
struct ImageOverlaps {
  std::vector<InstanceId> gt_ids;
  std::vector<ClassId> gt_class;
  std::vector<std::vector<double>> iou;  // [det][gt]
};

inline ImageOverlaps image_overlaps(const EvalImage& img) {
  const auto& gt = img.ground_truth;
  ImageOverlaps ov;
  std::map<InstanceId, std::size_t> column;
  std::vector<std::uint64_t> gt_area;
  for (const auto& [id, cls] : gt.classes) {
    column[id] = ov.gt_ids.size();
    ov.gt_ids.push_back(id);
    ov.gt_class.push_back(cls);
    gt_area.push_back(0);
  }
  std::vector<std::size_t> col_of_pixel(gt.labels.size(), SIZE_MAX);
  for (std::size_t i = 0; i < gt.labels.size(); ++i)
    if (const auto id = gt.labels[i]; id != 0) {
      const auto c = column.at(id);
      col_of_pixel[i] = c;
      ++gt_area[c];
    }
  for (const auto& d : img.detections) {
    if (!d.mask.same_shape(gt.labels)) throw ContractError("detection mask and ground truth differ in size");
    std::vector<std::uint64_t> inter(ov.gt_ids.size(), 0);
    std::uint64_t area = 0;
    for (std::size_t i = 0; i < d.mask.size(); ++i) {
      if (!d.mask[i]) continue;
      ++area;
      if (col_of_pixel[i] != SIZE_MAX) ++inter[col_of_pixel[i]];
    }
    std::vector<double> row(ov.gt_ids.size(), 0.0);
    for (std::size_t g = 0; g < row.size(); ++g) {
      const auto uni = area + gt_area[g] - inter[g];
      row[g] = uni ? static_cast<double>(inter[g]) / static_cast<double>(uni) : 0.0;
    }
    ov.iou.push_back(std::move(row));
  }
  return ov;
}

/// 101-point interpolated area under the PR curve of a ranked TP/FP list.
inline double interpolated_ap(const std::vector<bool>& tp_ranked, std::size_t n_gt) {
  const std::size_t n = tp_ranked.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += tp_ranked[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Precision envelope: best precision at any later rank.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double acc = 0.0;
  std::size_t idx = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    while (idx < n && recall[idx] < r - 1e-12) ++idx;
    if (idx < n) acc += precision[idx];
  }
  return acc / 101.0;
}

}  // namespace detail

/// Pooled COCO-style evaluation over a set of images.
inline EvalSummary evaluate(std::span<const EvalImage> images, const EvalConfig& config = {}) {
  config.validate();
  const auto effective_class = [&](ClassId c) { return config.class_aware ? c : ClassId{1}; };

  std::vector<detail::ImageOverlaps> overlaps;
  overlaps.reserve(images.size());
  for (const auto& img : images) overlaps.push_back(detail::image_overlaps(img));

  std::map<ClassId, std::size_t> gt_count;
  for (const auto& ov : overlaps)
    for (const auto c : ov.gt_class) ++gt_count[effective_class(c)];

  EvalSummary summary;
  summary.thresholds = config.iou_thresholds;
  summary.ap.assign(config.iou_thresholds.size(), 0.0);
  if (gt_count.empty()) return summary;

  for (const auto& [cls, n_gt] : gt_count) {
    // Rank every detection of this class: confidence descending, then image,
    // then detection index.
    struct Ranked {
      double confidence;
      std::size_t image;
      std::size_t det;
    };
    std::vector<Ranked> ranked;
    for (std::size_t i = 0; i < images.size(); ++i)
      for (std::size_t d = 0; d < images[i].detections.size(); ++d)
        if (effective_class(images[i].detections[d].cls) == cls)
          ranked.push_back({images[i].detections[d].confidence, i, d});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

    auto& per_t = summary.class_ap[cls];
    for (std::size_t t = 0; t < config.iou_thresholds.size(); ++t) {
      const double thr = config.iou_thresholds[t];
      std::vector<std::vector<bool>> taken(images.size());
      for (std::size_t i = 0; i < images.size(); ++i) taken[i].assign(overlaps[i].gt_ids.size(), false);
      std::vector<bool> tp(ranked.size(), false);
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        const auto& ov = overlaps[ranked[r].image];
        const auto& row = ov.iou[ranked[r].det];
        std::size_t best = SIZE_MAX;
        double best_iou = thr;
        for (std::size_t g = 0; g < row.size(); ++g) {
          if (taken[ranked[r].image][g] || effective_class(ov.gt_class[g]) != cls) continue;
          if (row[g] >= best_iou && (best == SIZE_MAX || row[g] > best_iou)) {
            best = g;
            best_iou = row[g];
          }
        }
        if (best != SIZE_MAX) {
          taken[ranked[r].image][best] = true;
          tp[r] = true;
        }
      }
      per_t.push_back(detail::interpolated_ap(tp, n_gt));
    }
  }
  for (std::size_t t = 0; t < summary.ap.size(); ++t) {
    double acc = 0.0;
    for (const auto& [_, v] : summary.class_ap) acc += v[t];
    summary.ap[t] = acc / static_cast<double>(summary.class_ap.size());
  }
  summary.mmap = std::accumulate(summary.ap.begin(), summary.ap.end(), 0.0) / static_cast<double>(summary.ap.size());
  return summary;
}

/// AP of one image at one IoU threshold, averaged over ground-truth classes;
/// nullopt when the image has no ground truth.
inline std::optional<double> average_precision(const std::vector<Detection>& dets, const InstanceMap& gts,
                                               double iou_threshold, bool class_aware = true) {
  const EvalImage img{dets, gts};
  EvalConfig cfg{{iou_threshold}, class_aware};
  const auto s = evaluate(std::span<const EvalImage>(&img, 1), cfg);
  if (!s.mmap) return std::nullopt;
  return s.ap[0];
}

/// Mean AP over the configured thresholds for one image.
inline std::optional<double> mmap(const std::vector<Detection>& dets, const InstanceMap& gts,
                                  const EvalConfig& config = {}) {
  const EvalImage img{dets, gts};
  return evaluate(std::span<const EvalImage>(&img, 1), config).mmap;
}

inline std::string summary_to_text(const EvalSummary& s) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  for (std::size_t t = 0; t < s.thresholds.size(); ++t)
    os << "AP@" << std::setprecision(2) << s.thresholds[t] << std::setprecision(6) << '=' << s.ap[t] << '\n';
  if (s.mmap)
    os << "mmAP=" << *s.mmap << '\n';
  else
    os << "mmAP=skipped\n";
  return os.str();
}

inline std::string summary_to_csv(const EvalSummary& s) {
  std::ostringstream os;
  os << "iou_threshold,ap\n" << std::fixed;
  for (std::size_t t = 0; t < s.thresholds.size(); ++t)
    os << std::setprecision(2) << s.thresholds[t] << ',' << std::setprecision(6) << s.ap[t] << '\n';
  os << "mean," << std::setprecision(6);
  if (s.mmap)
    os << *s.mmap << '\n';
  else
    os << "skipped\n";
  return os.str();
}

}  // namespace shapeseg
