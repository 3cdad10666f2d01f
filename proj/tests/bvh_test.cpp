#include "rtdbscan/bvh.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <random>
#include <vector>

namespace rtdbscan {
namespace {

std::vector<Sphere> spheres_over(const std::vector<Point>& pts, double eps) {
  std::vector<Sphere> out;
  for (const Point& p : pts) out.push_back(expand_sphere(p, eps));
  return out;
}

// Direct id census over the leaves, independent of validate_bvh.
std::vector<std::size_t> leaf_census(const Bvh& bvh) {
  std::vector<std::size_t> seen(bvh.sphere_count, 0);
  for (const BvhNode& node : bvh.nodes) {
    if (!node.is_leaf()) continue;
    for (std::uint32_t i = node.first; i < node.first + node.count; ++i) ++seen.at(bvh.sphere_ids[i]);
  }
  return seen;
}

TEST(BuildBvh, SingleSphereIsOneLeaf) {
  const auto spheres = spheres_over(testing::make_points({{1, 2, 0}}), 0.5);
  const Bvh bvh = build_bvh(spheres);
  ASSERT_EQ(bvh.nodes.size(), 1u);
  EXPECT_TRUE(bvh.nodes[0].is_leaf());
  EXPECT_EQ(bvh.nodes[0].box, sphere_aabb(spheres[0]));
  EXPECT_EQ(bvh.build_stats.depth, 1u);
  EXPECT_TRUE(validate_bvh(bvh, spheres).ok());
}

TEST(BuildBvh, TwoSeparatedSpheresWithUnitLeaves) {
  const auto spheres = spheres_over(testing::make_points({{0, 0, 0}, {10, 0, 0}}), 1.0);
  const Bvh bvh = build_bvh(spheres, {.leaf_capacity = 1});
  ASSERT_EQ(bvh.nodes.size(), 3u);
  const BvhNode& root = bvh.nodes[0];
  ASSERT_FALSE(root.is_leaf());
  EXPECT_TRUE(bvh.nodes[root.left].is_leaf());
  EXPECT_TRUE(bvh.nodes[root.right].is_leaf());
  Aabb expected = sphere_aabb(spheres[0]);
  expected.merge(sphere_aabb(spheres[1]));
  EXPECT_EQ(root.box, expected);
  EXPECT_EQ(root.box, (Aabb{{-1, -1, -1}, {11, 1, 1}}));
}

TEST(BuildBvh, Errors) {
  EXPECT_THROW(build_bvh(std::vector<Sphere>{}), EmptyDatasetError);
  const auto spheres = spheres_over(testing::make_points({{0, 0, 0}}), 1.0);
  EXPECT_THROW(build_bvh(spheres, {.leaf_capacity = 0}), std::invalid_argument);
  std::vector<Sphere> mixed = spheres_over(testing::make_points({{0, 0, 0}, {1, 1, 1}}), 1.0);
  mixed[1].radius = 2.0;
  EXPECT_THROW(build_bvh(mixed), std::invalid_argument);
}

class BuildBvhRandom : public ::testing::TestWithParam<SplitRule> {};

TEST_P(BuildBvhRandom, ThousandSpheresValidAndCoveredOnce) {
  std::mt19937_64 rng(3);
  for (const auto mix : {testing::Mix::Uniform, testing::Mix::Blobs, testing::Mix::Duplicates}) {
    const auto pts = testing::random_points(rng, 1000, mix, 3);
    const auto spheres = spheres_over(pts, 0.02);
    for (std::size_t cap : {1u, 4u, 16u}) {
      const Bvh bvh = build_bvh(spheres, {.leaf_capacity = cap, .split_rule = GetParam()});
      const auto report = validate_bvh(bvh, spheres);
      EXPECT_TRUE(report.ok()) << report.violations.front().message;
      const auto census = leaf_census(bvh);
      EXPECT_TRUE(std::all_of(census.begin(), census.end(), [](std::size_t c) { return c == 1; }));
      EXPECT_EQ(bvh.build_stats.node_count, bvh.nodes.size());
      EXPECT_EQ(bvh.build_stats.node_count, 2 * bvh.build_stats.leaf_count - 1);
      EXPECT_LE(bvh.build_stats.depth, detail::kMaxBvhDepth);
    }
  }
}

TEST_P(BuildBvhRandom, Deterministic) {
  std::mt19937_64 rng(5);
  const auto spheres = spheres_over(testing::random_points(rng, 3000, testing::Mix::Mixed, 2), 0.01);
  const BuildConfig cfg{.leaf_capacity = 4, .split_rule = GetParam()};
  const Bvh a = build_bvh(spheres, cfg);
  const Bvh b = build_bvh(spheres, cfg);
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  EXPECT_EQ(std::memcmp(a.nodes.data(), b.nodes.data(), a.nodes.size() * sizeof(BvhNode)), 0);
  EXPECT_EQ(a.sphere_ids, b.sphere_ids);
}

INSTANTIATE_TEST_SUITE_P(SplitRules, BuildBvhRandom,
                         ::testing::Values(SplitRule::MedianLongestAxis, SplitRule::BinnedSah));

TEST(BuildBvh, AllCoincidentTerminatesWithBalancedDepth) {
  std::vector<Point> pts;
  for (PointId i = 0; i < 4096; ++i) pts.push_back(Point{i, 0.5, 0.5, 0.0});
  const auto spheres = spheres_over(pts, 0.1);
  for (auto rule : {SplitRule::MedianLongestAxis, SplitRule::BinnedSah}) {
    const Bvh bvh = build_bvh(spheres, {.leaf_capacity = 4, .split_rule = rule});
    EXPECT_TRUE(validate_bvh(bvh, spheres).ok());
    EXPECT_EQ(bvh.build_stats.depth, 11u);  // 4096 / 4 = 2^10 leaves
  }
}

TEST(ValidateBvh, DetectsShrunkBox) {
  std::mt19937_64 rng(9);
  const auto spheres = spheres_over(testing::random_points(rng, 64, testing::Mix::Uniform), 0.05);
  Bvh bvh = build_bvh(spheres);
  ASSERT_FALSE(bvh.nodes[0].is_leaf());
  bvh.nodes[0].box.max[0] -= 0.1;
  const auto report = validate_bvh(bvh, spheres);
  EXPECT_FALSE(report.ok());
  EXPECT_GE(report.count(ViolationKind::Containment), 1u);
}

TEST(ValidateBvh, DetectsDuplicatedSphereId) {
  std::mt19937_64 rng(10);
  const auto spheres = spheres_over(testing::random_points(rng, 64, testing::Mix::Uniform), 0.05);
  Bvh bvh = build_bvh(spheres);
  const auto leaf = std::find_if(bvh.nodes.begin(), bvh.nodes.end(), [](const BvhNode& n) { return n.count >= 2; });
  ASSERT_NE(leaf, bvh.nodes.end());
  bvh.sphere_ids[leaf->first + 1] = bvh.sphere_ids[leaf->first];
  const auto report = validate_bvh(bvh, spheres);
  EXPECT_GE(report.count(ViolationKind::Coverage), 2u);  // one id twice, another missing
}

TEST(ValidateBvh, DetectsSharedChildAndLooseBox) {
  std::mt19937_64 rng(12);
  const auto spheres = spheres_over(testing::random_points(rng, 64, testing::Mix::Uniform), 0.05);
  {
    Bvh bvh = build_bvh(spheres);
    bvh.nodes[0].right = bvh.nodes[0].left;
    EXPECT_GE(validate_bvh(bvh, spheres).count(ViolationKind::Structure), 1u);
  }
  {
    Bvh bvh = build_bvh(spheres);
    bvh.nodes[0].box.max[1] += 1.0;
    EXPECT_EQ(validate_bvh(bvh, spheres).count(ViolationKind::Tightness), 1u);
  }
  {
    Bvh bvh = build_bvh(spheres, {.leaf_capacity = 8});
    bvh.leaf_capacity = 1;
    EXPECT_GE(validate_bvh(bvh, spheres).count(ViolationKind::LeafSize), 1u);
  }
}

TEST(QueryPoint, OutsideRootVisitsOnlyRoot) {
  std::mt19937_64 rng(13);
  const auto spheres = spheres_over(testing::random_points(rng, 200, testing::Mix::Uniform), 0.05);
  const Bvh bvh = build_bvh(spheres);
  std::size_t calls = 0;
  const VisitStats stats = query_point(bvh, Point{0, 5.0, 5.0, 0.0}, [&](PointId) { ++calls; });
  EXPECT_EQ(calls, 0u);
  EXPECT_EQ(stats, (VisitStats{1, 0, 0}));
}

TEST(QueryPoint, SiblingPruned) {
  const auto spheres = spheres_over(testing::make_points({{0, 0, 0}, {10, 0, 0}}), 1.0);
  const Bvh bvh = build_bvh(spheres, {.leaf_capacity = 1});
  std::vector<PointId> seen;
  const VisitStats stats = query_point(bvh, Point{0, 10.5, 0.0, 0.0}, [&](PointId id) { seen.push_back(id); });
  EXPECT_EQ(seen, std::vector<PointId>{1});
  EXPECT_EQ(stats.leaves_visited, 1u);
  EXPECT_EQ(stats.nodes_visited, 3u);
}

TEST(QueryPoint, CandidatesCoverBruteForce) {
  std::mt19937_64 rng(17);
  const auto pts = testing::random_points(rng, 500, testing::Mix::Mixed, 3);
  const double eps = 0.07;
  const auto spheres = spheres_over(pts, eps);
  const Bvh bvh = build_bvh(spheres);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  for (int k = 0; k < 100; ++k) {
    const Point q{0, u(rng), u(rng), u(rng)};
    std::vector<PointId> hits;
    const VisitStats stats = query_point(bvh, q, [&](PointId s) {
      if (point_in_sphere(q, spheres[s])) hits.push_back(s);
    });
    std::sort(hits.begin(), hits.end());
    std::vector<PointId> expected;
    for (PointId j = 0; j < pts.size(); ++j) {
      if (distance(q, pts[j]) <= eps) expected.push_back(j);
    }
    ASSERT_EQ(hits, expected);
    EXPECT_LE(stats.leaves_visited, bvh.build_stats.leaf_count);
  }
}

TEST(QueryPoint, VisitorCanStopTraversal) {
  std::vector<Point> pts;
  for (PointId i = 0; i < 100; ++i) pts.push_back(Point{i, 0.0, 0.0, 0.0});
  const auto spheres = spheres_over(pts, 1.0);
  const Bvh bvh = build_bvh(spheres);
  std::size_t calls = 0;
  const VisitStats stats = query_point(bvh, pts[0], [&](PointId) { return ++calls < 7; });
  EXPECT_EQ(calls, 7u);
  EXPECT_EQ(stats.spheres_tested, 7u);
}

TEST(CountWithin, Examples) {
  const auto pts = testing::three_sphere_config();
  const auto spheres = spheres_over(pts, 1.0);
  const Bvh bvh = build_bvh(spheres, {.leaf_capacity = 1});
  EXPECT_EQ(count_within(bvh, pts[1], spheres, 1), 2u);
  EXPECT_EQ(count_within(bvh, pts[0], spheres, 0), 1u);

  const auto far = spheres_over(testing::make_points({{0, 0, 0}, {5, 0, 0}}), 1.0);
  const Bvh far_bvh = build_bvh(far);
  EXPECT_EQ(count_within(far_bvh, Point{0, 0, 0, 0}, far, 0), 0u);
}

TEST(CountWithin, LimitAgreesWithBruteForceThreshold) {
  std::mt19937_64 rng(19);
  const auto pts = testing::random_points(rng, 300, testing::Mix::Mixed);
  const double eps = 0.05;
  const auto spheres = spheres_over(pts, eps);
  const Bvh bvh = build_bvh(spheres);
  const auto adj = testing::oracle_adjacency(pts, eps);
  for (PointId i = 0; i < pts.size(); ++i) {
    VisitStats limited;
    VisitStats full;
    const std::size_t capped = count_within(bvh, pts[i], spheres, i, 5, &limited);
    const std::size_t exact = count_within(bvh, pts[i], spheres, i, std::nullopt, &full);
    ASSERT_EQ(capped >= 5, adj[i].size() >= 5) << "point " << i;
    ASSERT_EQ(exact, adj[i].size());
    ASSERT_LE(limited.spheres_tested, full.spheres_tested);
  }
}

}  // namespace
}  // namespace rtdbscan
