#include <gtest/gtest.h>

#include <random>

#include "shapeseg/eval.hpp"
#include "oracles.hpp"

using namespace shapeseg;

namespace {

InstanceMap boxes_map(int w, int h, const std::vector<Box>& boxes) {
  InstanceMap m(w, h);
  InstanceId id = 0;
  for (const auto& b : boxes) {
    ++id;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) m.labels(x, y) = id;
    m.classes[id] = 1;
  }
  return m;
}

std::vector<Detection> perfect(const InstanceMap& gt) {
  std::vector<Detection> d;
  for (const auto& [id, c] : gt.classes) d.push_back({gt.mask_of(id), c, 1.0});
  return d;
}

/// Random detections: jittered GT masks, random blobs, random classes.
std::vector<Detection> random_detections(std::mt19937_64& rng, const InstanceMap& gt, int classes) {
  std::vector<Detection> out;
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> cls(1, classes);
  for (const auto& [id, c] : gt.classes) {
    if (u(rng) < 0.2) continue;
    auto m = gt.mask_of(id);
    for (auto& v : m)
      if (u(rng) < 0.15) v = v ? 0 : (u(rng) < 0.3);
    out.push_back({m, u(rng) < 0.8 ? c : static_cast<ClassId>(cls(rng)), std::floor(u(rng) * 8) / 8});
  }
  const int extra = static_cast<int>(u(rng) * 3);
  for (int i = 0; i < extra; ++i)
    out.push_back({oracle::random_mask(rng, gt.width(), gt.height(), 0.1), static_cast<ClassId>(cls(rng)), u(rng)});
  return out;
}

std::vector<oracle::Det> as_oracle(const std::vector<Detection>& d) {
  std::vector<oracle::Det> out;
  for (const auto& x : d) out.push_back({x.mask, x.cls, x.confidence});
  return out;
}

}  // namespace

TEST(MaskIou, Examples) {
  const auto a = box_mask({0, 0, 9, 9}, 20, 20);
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, box_mask({10, 10, 19, 19}, 20, 20)), 0.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, box_mask({5, 0, 14, 9}, 20, 20)), 1.0 / 3.0);
  EXPECT_EQ(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)), 0.0);
  EXPECT_THROW(mask_iou(BinaryMask(3, 3), BinaryMask(3, 4)), ContractError);
}

TEST(MaskIou, MatchesCounting) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_mask(rng, 17, 11, 0.4), b = oracle::random_mask(rng, 17, 11, 0.4);
    EXPECT_NEAR(mask_iou(a, b), oracle::count_iou(a, b), 1e-12);
  }
}

TEST(AveragePrecision, SingleExactDetection) {
  const auto gt = boxes_map(20, 20, {{2, 2, 8, 8}});
  EXPECT_DOUBLE_EQ(*average_precision(perfect(gt), gt, 0.5), 1.0);
}

TEST(AveragePrecision, HalfRecall) {
  // Recall 1/2 at precision 1: 51 of the 101 recall levels are reached.
  const auto gt = boxes_map(20, 20, {{2, 2, 8, 8}, {12, 12, 18, 18}});
  const std::vector<Detection> d{{gt.mask_of(1), 1, 0.9}};
  for (double t : coco_iou_thresholds()) EXPECT_DOUBLE_EQ(*average_precision(d, gt, t), 51.0 / 101.0);
}

TEST(AveragePrecision, NoGroundTruthIsSkipped) {
  EXPECT_FALSE(average_precision({}, InstanceMap(4, 4), 0.5).has_value());
}

TEST(AveragePrecision, MatchesDefinitionOnRandomCases) {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = oracle::random_boxes(rng, 16 + trial % 17, 16 + trial % 13, 1 + trial % 5);
    if (gt.classes.empty()) continue;
    auto classed = gt;
    std::uniform_int_distribution<int> cls(1, 2);
    for (auto& [_, c] : classed.classes) c = static_cast<ClassId>(cls(rng));
    const auto dets = random_detections(rng, classed, 2);
    for (double t : {0.5, 0.75, 0.9})
      EXPECT_NEAR(*average_precision(dets, classed, t), oracle::ap_image(as_oracle(dets), classed, t), 1e-12);
  }
}

TEST(Mmap, PerfectAndEmpty) {
  const auto gt = boxes_map(20, 20, {{2, 2, 8, 8}, {12, 12, 18, 18}});
  EXPECT_DOUBLE_EQ(*mmap(perfect(gt), gt), 1.0);
  EXPECT_DOUBLE_EQ(*mmap({}, gt), 0.0);
}

TEST(Mmap, RemovingFalsePositiveNeverHurts) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = oracle::random_boxes(rng, 24, 24, 4);
    if (gt.classes.empty()) continue;
    auto dets = random_detections(rng, gt, 1);
    if (dets.empty()) continue;
    // Mark the false positives at IoU 0.5 with the reference matcher.
    const EvalImage img{dets, gt};
    const auto base = *average_precision(dets, gt, 0.5);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      bool fp = true;
      for (const auto& [id, _] : gt.classes) fp = fp && mask_iou(dets[i].mask, gt.mask_of(id)) < 0.5;
      if (!fp) continue;
      auto fewer = dets;
      fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(i));
      EXPECT_GE(*average_precision(fewer, gt, 0.5), base - 1e-12);
    }
  }
}

TEST(Mmap, RankingOnly) {
  std::mt19937_64 rng(84);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = oracle::random_boxes(rng, 24, 24, 4);
    if (gt.classes.empty()) continue;
    auto dets = random_detections(rng, gt, 1);
    const auto v = mmap(dets, gt);
    for (auto& d : dets) d.confidence = std::exp(3 * d.confidence) / 100;
    EXPECT_NEAR(*mmap(dets, gt), *v, 1e-12);
    EXPECT_GE(*v, 0.0);
    EXPECT_LE(*v, 1.0);
  }
}

TEST(Evaluate, ClassAveragingAndAgnostic) {
  auto gt = boxes_map(30, 30, {{1, 1, 8, 8}, {12, 12, 20, 20}});
  gt.classes[2] = 2;
  std::vector<Detection> d{{gt.mask_of(1), 1, 1.0}, {gt.mask_of(2), 1, 0.5}};
  const EvalImage img{d, gt};
  const auto aware = evaluate(std::span<const EvalImage>(&img, 1));
  EXPECT_DOUBLE_EQ(*aware.mmap, 0.5);  // class 1 perfect, class 2 missed
  const auto agnostic = evaluate(std::span<const EvalImage>(&img, 1), {coco_iou_thresholds(), false});
  EXPECT_DOUBLE_EQ(*agnostic.mmap, 1.0);
}

TEST(Evaluate, PoolsAcrossImages) {
  const auto gt = boxes_map(20, 20, {{2, 2, 8, 8}});
  std::vector<EvalImage> imgs{{perfect(gt), gt}, {{}, gt}};
  EXPECT_DOUBLE_EQ(*evaluate(imgs).mmap, 51.0 / 101.0);
}

TEST(Evaluate, GreedyNeverReusesGroundTruth) {
  const auto gt = boxes_map(20, 20, {{2, 2, 8, 8}});
  std::vector<Detection> d{{gt.mask_of(1), 1, 0.9}, {gt.mask_of(1), 1, 0.8}};
  EXPECT_DOUBLE_EQ(*average_precision(d, gt, 0.5), 1.0);  // second is a FP after full recall
  d[0].confidence = 0.1;
  EXPECT_DOUBLE_EQ(*average_precision(d, gt, 0.5), 1.0);
}

TEST(Evaluate, RejectsBadThresholds) {
  const EvalImage img{{}, boxes_map(4, 4, {{0, 0, 1, 1}})};
  EXPECT_THROW(evaluate(std::span<const EvalImage>(&img, 1), {{}, true}), ParameterError);
  EXPECT_THROW(evaluate(std::span<const EvalImage>(&img, 1), {{0.6, 0.5}, true}), ParameterError);
  EXPECT_THROW(evaluate(std::span<const EvalImage>(&img, 1), {{1.0}, true}), ParameterError);
}

TEST(Evaluate, TextOutputs) {
  const auto gt = boxes_map(20, 20, {{2, 2, 8, 8}});
  const EvalImage img{perfect(gt), gt};
  const auto s = evaluate(std::span<const EvalImage>(&img, 1));
  EXPECT_NE(summary_to_text(s).find("mmAP=1.000000"), std::string::npos);
  EXPECT_NE(summary_to_csv(s).find("mean,1.000000"), std::string::npos);
}
