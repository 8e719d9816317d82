#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shapeseg/raster.hpp"
#include "oracles.hpp"

using namespace shapeseg;

namespace {

BinaryMask from_points(int w, int h, std::initializer_list<Point> pts) {
  BinaryMask m(w, h);
  for (auto p : pts) m(p.x, p.y) = 1;
  return m;
}

}  // namespace

TEST(Components, FullSquareIsOneComponent) {
  BinaryMask m(3, 3, 1);
  EXPECT_EQ(connected_components(m, Connectivity::four).size(), 1u);
}

TEST(Components, DiagonalPairDependsOnAdjacency) {
  const auto m = from_points(4, 4, {{1, 1}, {2, 2}});
  EXPECT_EQ(connected_components(m, Connectivity::four).size(), 2u);
  EXPECT_EQ(connected_components(m, Connectivity::eight).size(), 1u);
}

TEST(Components, EmptyMaskHasNone) { EXPECT_TRUE(connected_components(BinaryMask(5, 5)).empty()); }

TEST(Components, MatchFloodFillOnRandomMasks) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = oracle::random_mask(rng, 32, 32, 0.2 + 0.01 * trial);
    for (auto conn : {Connectivity::four, Connectivity::eight}) {
      int n = 0;
      const auto lab = oracle::flood_labels(m, conn, n);
      const auto cc = label_components(m, conn);
      ASSERT_EQ(cc.count, static_cast<std::uint32_t>(n));
      // Same numbering (first-pixel order), hence pixelwise equal labels.
      for (std::size_t i = 0; i < m.size(); ++i) ASSERT_EQ(static_cast<int>(cc.labels[i]), lab[i]);
    }
  }
}

TEST(Components, PartitionTheInput) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_mask(rng, 24, 20, 0.45);
    const auto parts = connected_components(m, Connectivity::eight);
    std::vector<int> cover(m.size(), 0);
    for (const auto& p : parts) {
      ASSERT_TRUE(p.any());
      for (std::size_t i = 0; i < p.size(); ++i) cover[i] += p[i] ? 1 : 0;
    }
    for (std::size_t i = 0; i < m.size(); ++i) ASSERT_EQ(cover[i], m[i] ? 1 : 0);
  }
}

TEST(BoundingBox, Examples) {
  EXPECT_EQ(bounding_box(from_points(10, 10, {{5, 7}})), (Box{5, 7, 5, 7}));
  EXPECT_EQ(bounding_box(from_points(12, 12, {{0, 0}, {9, 3}})), (Box{0, 0, 9, 3}));
  EXPECT_THROW(bounding_box(BinaryMask(4, 4)), EmptyMaskError);
}

TEST(BoundingBox, MatchesScan) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = oracle::random_mask(rng, 16, 16, 0.05);
    if (!m.any()) continue;
    EXPECT_EQ(bounding_box(m), oracle::scan_box(m));
  }
}

TEST(ConvexHull, Triangle) {
  const auto hull = convex_hull(from_points(10, 10, {{1, 1}, {7, 2}, {3, 6}}));
  ASSERT_EQ(hull.size(), 3u);
  EXPECT_GT(polygon_area(hull), 0.0);  // counterclockwise
  std::set<std::pair<double, double>> got;
  for (auto p : hull) got.insert({p.x, p.y});
  EXPECT_EQ(got, (std::set<std::pair<double, double>>{{1.5, 1.5}, {7.5, 2.5}, {3.5, 6.5}}));
}

TEST(ConvexHull, FilledSquareHasFourCorners) {
  BinaryMask m(20, 20);
  for (int y = 3; y < 13; ++y)
    for (int x = 5; x < 15; ++x) m(x, y) = 1;
  const auto hull = convex_hull(m);
  EXPECT_EQ(hull.size(), 4u);
  EXPECT_DOUBLE_EQ(polygon_area(hull), 81.0);
}

TEST(ConvexHull, MatchesGiftWrapping) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> c(0, 63);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({c(rng), c(rng)});
    const auto hull = convex_hull(pts);
    EXPECT_EQ(std::set<Point>(hull.begin(), hull.end()), oracle::gift_wrap(pts));
  }
}

TEST(ConvexHull, ContainsEveryPixelCenter) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_mask(rng, 24, 24, 0.03);
    if (!m.any()) continue;
    const auto hull = convex_hull(m);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x)
        if (m(x, y)) ASSERT_TRUE(oracle::point_in_convex(hull, x + 0.5, y + 0.5)) << x << "," << y;
  }
}

TEST(MinAreaRect, AxisAlignedBar) {
  BinaryMask m(40, 20);
  for (int y = 5; y < 9; ++y)
    for (int x = 3; x < 23; ++x) m(x, y) = 1;
  const auto r = min_area_rect(m);
  EXPECT_DOUBLE_EQ(r.long_side, 20.0);
  EXPECT_DOUBLE_EQ(r.short_side, 4.0);
  EXPECT_DOUBLE_EQ(r.aspect_ratio(), 5.0);
}

TEST(MinAreaRect, RotatedBarKeepsRatio) {
  const double t = 30.0 * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  const PointF center{64, 64};
  Polygon poly;
  for (auto [u, v] : {std::pair{-40.0, -8.0}, {40.0, -8.0}, {40.0, 8.0}, {-40.0, 8.0}})
    poly.push_back({center.x + u * c - v * s, center.y + u * s + v * c});
  const auto m = rasterize_polygon(poly, 128, 128);
  // Side lengths carry a one-pixel pad that is exact only when axis aligned.
  EXPECT_NEAR(min_area_rect(m).aspect_ratio(), 5.0, 0.3);
}

TEST(MinAreaRect, NoLargerThanAngleSweep) {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> c(0, 40);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point> pts;
    const int n = 3 + trial % 20;
    for (int i = 0; i < n; ++i) pts.push_back({c(rng), c(rng)});
    const auto r = min_area_rect(pts);
    const double span = (r.long_side - 1.0) * (r.short_side - 1.0);
    EXPECT_LE(span, oracle::swept_span_area(pts) + 1e-9);
  }
}

TEST(MinAreaRect, CoversMask) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = oracle::random_mask(rng, 20, 20, 0.1 + 0.01 * trial);
    if (!m.any()) continue;
    EXPECT_GE(min_area_rect(m).area(), static_cast<double>(m.count()));
  }
}

TEST(MinAreaRect, SinglePixelAndEmpty) {
  const auto r = min_area_rect(from_points(5, 5, {{2, 3}}));
  EXPECT_DOUBLE_EQ(r.aspect_ratio(), 1.0);
  EXPECT_THROW(min_area_rect(BinaryMask(3, 3)), EmptyMaskError);
}

TEST(Rasterize, TinyTriangle) {
  const auto m = rasterize_polygon({{3.1, 3.1}, {3.4, 3.1}, {3.1, 3.4}}, 8, 8);
  EXPECT_LE(m.count(), 1u);
}

TEST(Rasterize, SquareCoversExactly) {
  const auto m = rasterize_polygon({{0, 0}, {10, 0}, {10, 10}, {0, 10}}, 16, 16);
  EXPECT_EQ(m.count(), 100u);
}

TEST(Rasterize, ConvexPolygonNearShoelaceArea) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> c(1.0, 62.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({static_cast<int>(c(rng)), static_cast<int>(c(rng))});
    Polygon poly;
    for (auto p : convex_hull(pts)) poly.push_back({double(p.x), double(p.y)});
    if (poly.size() < 3) continue;
    double perimeter = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& a = poly[i];
      const auto& b = poly[(i + 1) % poly.size()];
      perimeter += std::hypot(a.x - b.x, a.y - b.y);
    }
    const auto m = rasterize_polygon(poly, 64, 64);
    EXPECT_NEAR(static_cast<double>(m.count()), oracle::shoelace(poly), perimeter);
  }
}

TEST(Rasterize, RejectsNonFinite) {
  EXPECT_THROW(rasterize_polygon({{0, 0}, {NAN, 1}, {1, 1}}, 4, 4), ParameterError);
}

TEST(DistanceTransform, MatchesBruteForce) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_mask(rng, 17, 13, 0.02 + 0.02 * (trial % 5));
    if (!m.any()) continue;
    EXPECT_EQ(squared_distance_transform(m), oracle::brute_sq_distance(m));
  }
}

TEST(DistanceTransform, EmptyMaskIsInfinite) {
  const auto d = squared_distance_transform(BinaryMask(4, 3));
  for (double v : d) EXPECT_TRUE(std::isinf(v));
}

TEST(Rle, RoundTripAndLeadingZeroRun) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = oracle::random_mask(rng, 9, 7, 0.5);
    const auto runs = rle_encode(m);
    if (m[0]) EXPECT_EQ(runs.front(), 0u);
    EXPECT_EQ(rle_decode(runs, 9, 7), m);
    EXPECT_EQ(rle_from_string(rle_to_string(runs)), runs);
  }
}

TEST(Rle, RejectsBadCodes) {
  EXPECT_THROW(rle_decode(std::vector<std::uint32_t>{3, 2}, 2, 2), FormatError);
  EXPECT_THROW(rle_decode(std::vector<std::uint32_t>{3, 2}, 4, 4), FormatError);
  EXPECT_THROW(rle_from_string("1 -2"), FormatError);
}

TEST(Raster, OperationsArePure) {
  std::mt19937_64 rng(21);
  const auto m = oracle::random_mask(rng, 30, 30, 0.3);
  EXPECT_EQ(label_components(m, Connectivity::eight).labels, label_components(m, Connectivity::eight).labels);
  const auto a = min_area_rect(m), b = min_area_rect(m);
  EXPECT_EQ(a.long_side, b.long_side);
  EXPECT_EQ(a.angle, b.angle);
  EXPECT_EQ(squared_distance_transform(m), squared_distance_transform(m));
}
