#include <gtest/gtest.h>

#include <deque>
#include <random>
#include <set>

#include "shapeseg/affinity.hpp"
#include "shapeseg/graph_merge.hpp"
#include "shapeseg/synth.hpp"
#include "oracles.hpp"

using namespace shapeseg;

namespace {

/// True when both label grids describe the same partition of the same
/// foreground (ids may differ).
bool same_partition(const Grid<InstanceId>& a, const Grid<InstanceId>& b) {
  if (!a.same_shape(b)) return false;
  std::map<InstanceId, InstanceId> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (a[i] == 0) continue;
    if (auto [it, fresh] = ab.emplace(a[i], b[i]); !fresh && it->second != b[i]) return false;
    if (auto [it, fresh] = ba.emplace(b[i], a[i]); !fresh && it->second != a[i]) return false;
  }
  return true;
}

SegmentationResult oracle_segment(const InstanceMap& gt, const AffinityKernel& k, MergeOptions opt = {}) {
  return segment(gt_affinity(gt, k), semantic_from_instances(gt, 1.0, 0), opt);
}

/// Every instance's pixels connected through kernel offsets (either direction).
bool hop_connected(const InstanceMap& m, const AffinityKernel& k) {
  for (const auto& [id, px] : instance_pixels(m)) {
    std::set<std::uint32_t> seen{px.front()};
    std::deque<std::uint32_t> q{px.front()};
    while (!q.empty()) {
      const auto p = q.front();
      q.pop_front();
      const int x = static_cast<int>(p % m.width()), y = static_cast<int>(p / m.width());
      for (auto o : k.offsets)
        for (int s : {1, -1}) {
          const int nx = x + s * o.dx, ny = y + s * o.dy;
          if (!m.labels.contains(nx, ny) || m.labels(nx, ny) != id) continue;
          const auto n = static_cast<std::uint32_t>(m.labels.index(nx, ny));
          if (seen.insert(n).second) q.push_back(n);
        }
    }
    if (seen.size() != px.size()) return false;
  }
  return true;
}

InstanceMap rect_instances(int w, int h, const std::vector<Box>& boxes) {
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

}  // namespace

TEST(BuildGraph, SingleConnectingSlot) {
  InstanceMap m(2, 1);
  m.labels(0, 0) = m.labels(1, 0) = 1;
  m.classes[1] = 1;
  const auto g = build_graph(gt_affinity(m, generate_asis_kernel(1, 1)), m.foreground());
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].score, 1.0f);
}

TEST(BuildGraph, HalfAffinityIsNeutral) {
  AffinityMap aff(generate_asis_kernel(1, 1), 2, 1);
  aff.values()[aff.slot(0, 0, 0)] = 0.5f;
  BinaryMask fg(2, 1, 1);
  const auto g = build_graph(aff, fg);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].score, 0.0f);
}

TEST(BuildGraph, MatchesSlotEnumeration) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  for (const auto& k : {generate_asis_kernel(4, 2), generate_symmetric_kernel(3, 1)}) {
    AffinityMap aff(k, 32, 32);
    for (auto& v : aff.values()) v = val(rng);
    const auto fg = oracle::random_mask(rng, 32, 32, 0.6);
    std::vector<int> node(fg.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < fg.size(); ++i)
      if (fg[i]) node[i] = next++;

    // Every valid slot between foreground pixels, keyed by unordered pair.
    std::map<std::pair<int, int>, std::vector<double>> slots;
    for (std::size_t c = 0; c < k.size(); ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const int nx = x + k.offsets[c].dx, ny = y + k.offsets[c].dy;
          if (!aff.valid(c, x, y) || !fg(x, y) || !fg(nx, ny)) continue;
          int a = node[fg.index(x, y)], b = node[fg.index(nx, ny)];
          if (a > b) std::swap(a, b);
          slots[{a, b}].push_back(aff.value(c, x, y));
        }
    std::vector<PixelGraph::Edge> want;
    for (const auto& [pair, vals] : slots) {
      ASSERT_LE(vals.size(), 2u);
      const double mean = vals.size() == 2 ? 0.5 * (vals[0] + vals[1]) : vals[0];
      want.push_back({static_cast<std::uint32_t>(pair.first), static_cast<std::uint32_t>(pair.second),
                      static_cast<float>(2.0 * mean - 1.0)});
    }
    auto got = build_graph(aff, fg).edges;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got.size(), want.size());
    EXPECT_EQ(got, want);
  }
}

TEST(BuildGraph, RejectsShapeMismatch) {
  AffinityMap aff(generate_asis_kernel(1, 1), 4, 4);
  EXPECT_THROW(build_graph(aff, BinaryMask(4, 5)), ContractError);
}

TEST(GraphMerge, TwoBlobsReconstructExactly) {
  const auto gt = rect_instances(40, 30, {{2, 2, 12, 20}, {20, 5, 35, 25}});
  const auto res = oracle_segment(gt, generate_asis_kernel(3, 1));
  EXPECT_EQ(res.instance_map.instance_count(), 2u);
  EXPECT_TRUE(same_partition(res.instance_map.labels, gt.labels));
}

TEST(GraphMerge, KernelReachDecidesBridging) {
  // One instance: two 6 px tall bars separated by 5 empty columns, so the
  // nearest pixel centers are 6 apart.
  InstanceMap gt(60, 12);
  for (int y = 3; y < 9; ++y)
    for (int x = 5; x < 55; ++x)
      if (x < 25 || x > 29) gt.labels(x, y) = 1;
  gt.classes[1] = 1;
  EXPECT_EQ(oracle_segment(gt, generate_asis_kernel(8, 1)).instance_map.instance_count(), 1u);
  EXPECT_EQ(oracle_segment(gt, generate_asis_kernel(4, 1)).instance_map.instance_count(), 2u);
}

TEST(GraphMerge, ThresholdAndOrder) {
  // Chain a - b - c: a strong bond, a weak negative one.
  PixelGraph g;
  g.width = 3, g.height = 1;
  g.node_pixel = {0, 1, 2};
  g.edges = {{0, 1, 0.9f}, {1, 2, -0.2f}};
  g.adjacency_offsets = {0, 1, 3, 4};
  g.adjacency_edges = {0, 0, 1, 1};
  auto res = graph_merge(g, {0.0, 1, 1.0});
  EXPECT_EQ(res.instance_map.instance_count(), 2u);
  EXPECT_EQ(res.instance_map.labels(0, 0), res.instance_map.labels(1, 0));
  EXPECT_NE(res.instance_map.labels(1, 0), res.instance_map.labels(2, 0));
  EXPECT_NEAR(res.confidences.at(res.instance_map.labels(0, 0)), 0.95, 1e-6);
  res = graph_merge(g, {-0.5, 1, 1.0});
  EXPECT_EQ(res.instance_map.instance_count(), 1u);
}

TEST(GraphMerge, MinInstanceSize) {
  const auto gt = rect_instances(30, 30, {{1, 1, 10, 10}, {20, 20, 21, 21}});
  EXPECT_EQ(oracle_segment(gt, generate_asis_kernel(2, 1)).instance_map.instance_count(), 1u);
  EXPECT_EQ(oracle_segment(gt, generate_asis_kernel(2, 1), {0.0, 0, 1.0}).instance_map.instance_count(), 2u);
}

TEST(GraphMerge, EmptyForeground) {
  const InstanceMap gt(16, 16);
  SemanticMap sem(16, 16, 2);
  for (std::size_t i = 0; i < 256; ++i) sem.at(i)[0] = 1.0f;
  const auto res = segment(gt_affinity(gt, generate_asis_kernel(2, 1)), sem);
  EXPECT_EQ(res.instance_map.instance_count(), 0u);
  for (auto v : res.instance_map.labels) EXPECT_EQ(v, 0u);
}

TEST(GraphMerge, PartitionAndDeterminismUnderNoise) {
  std::mt19937_64 rng(62);
  const auto k = generate_asis_kernel(6, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gt = oracle::random_boxes(rng, 48, 48, 5);
    const auto aff = corrupt_affinity(gt_affinity(gt, k), {0.15, 0.1, static_cast<std::uint64_t>(trial)});
    const auto sem = semantic_from_instances(gt, 1.0, 0);
    const auto a = segment(aff, sem), b = segment(aff, sem);
    EXPECT_EQ(a.instance_map.labels, b.instance_map.labels);
    EXPECT_EQ(a.confidences, b.confidences);
    const auto fg = sem.foreground();
    for (std::size_t i = 0; i < fg.size(); ++i)
      if (a.instance_map.labels[i]) ASSERT_TRUE(fg[i]);
    EXPECT_NO_THROW(a.instance_map.validate());
    InstanceId expect = 1;
    for (const auto& [id, _] : a.instance_map.classes) EXPECT_EQ(id, expect++);
    for (const auto& [_, c] : a.confidences) EXPECT_TRUE(c >= 0.0 && c <= 1.0);
  }
}

TEST(GraphMerge, FragmentedNoiseDoesNotFlood) {
  // Two touching boxes; a handful of flipped cross edges must not merge them.
  const auto gt = rect_instances(40, 20, {{0, 0, 19, 19}, {20, 0, 39, 19}});
  const auto k = generate_asis_kernel(4, 1);
  const auto aff = corrupt_affinity(gt_affinity(gt, k), {0.05, 0.0, 3});
  const auto res = segment(aff, semantic_from_instances(gt, 1.0, 0));
  EXPECT_EQ(res.instance_map.instance_count(), 2u);
}

TEST(ClassAssign, OneHotGivesTrueClasses) {
  auto gt = rect_instances(30, 30, {{1, 1, 10, 10}, {15, 15, 28, 28}});
  gt.classes[2] = 3;
  const auto sem = semantic_from_instances(gt, 1.0, 0);
  SegmentationResult seg{gt, {{1, 0.7}, {2, 1.0}}};
  const auto out = class_assign(seg, sem);
  EXPECT_EQ(out.instance_map.classes, gt.classes);
  EXPECT_DOUBLE_EQ(out.confidences.at(1), 0.7);
  EXPECT_DOUBLE_EQ(out.confidences.at(2), 1.0);
}

TEST(ClassAssign, BackgroundRegionRemoved) {
  const auto gt = rect_instances(30, 30, {{1, 1, 10, 10}});
  auto spurious = rect_instances(30, 30, {{1, 1, 10, 10}, {15, 15, 20, 20}});
  const auto sem = semantic_from_instances(gt, 1.0, 0, 0.0, 2);
  const auto out = class_assign({spurious, {}}, sem);
  EXPECT_EQ(out.instance_map.instance_count(), 1u);
  EXPECT_EQ(out.instance_map.labels(17, 17), 0u);
}

TEST(ClassAssign, SoftOracleKeepsClasses) {
  std::mt19937_64 rng(63);
  const auto gt = oracle::random_boxes(rng, 40, 40, 4);
  auto classed = gt;
  InstanceId i = 0;
  for (auto& [id, c] : classed.classes) c = 1 + (i++ % 3);
  const auto out = class_assign({classed, {}}, semantic_from_instances(classed, 0.8, 0));
  EXPECT_EQ(out.instance_map.classes, classed.classes);
}

TEST(ClassAssign, RejectsShapeMismatch) {
  EXPECT_THROW(class_assign({InstanceMap(4, 4), {}}, SemanticMap(5, 4, 2)), ContractError);
}

TEST(Segment, HopConnectedScenesReconstructExactly) {
  const auto k = generate_asis_kernel(12, 2);
  int checked = 0;
  for (const auto f : kAllFamilies)
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto gt = generate_scene(default_scene_spec(f, 128, 128, seed)).instance_map;
      if (!hop_connected(gt, k)) continue;
      ++checked;
      const auto res = oracle_segment(gt, k);
      EXPECT_TRUE(same_partition(res.instance_map.labels, gt.labels)) << family_name(f) << " " << seed;
      for (const auto& [id, c] : res.instance_map.classes) {
        const auto first = std::find(res.instance_map.labels.begin(), res.instance_map.labels.end(), id);
        EXPECT_EQ(c, gt.classes.at(gt.labels[first - res.instance_map.labels.begin()]));
      }
    }
  EXPECT_GE(checked, 8);
}
