#include "rtdbscan/geometry.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace rtdbscan {
namespace {

Point at(double x, double y, double z, PointId id = 0) { return Point{id, x, y, z}; }

TEST(Distance, KnownValues) {
  EXPECT_EQ(distance(at(0, 0, 0), at(0, 0, 0)), 0.0);
  EXPECT_EQ(distance(at(0, 0, 0), at(3, 4, 0)), 5.0);
  EXPECT_EQ(distance(at(1, 2, 3), at(4, 6, 3)), 5.0);
}

TEST(Distance, TriangleInequalityAndSymmetry) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 10000; ++i) {
    const Point a = at(u(rng), u(rng), u(rng));
    const Point b = at(u(rng), u(rng), u(rng));
    const Point c = at(u(rng), u(rng), u(rng));
    ASSERT_EQ(distance(a, b), distance(b, a));
    ASSERT_GE(distance(a, b), 0.0);
    const double slack = 1e-12 * (distance(a, b) + distance(b, c));
    ASSERT_LE(distance(a, c), distance(a, b) + distance(b, c) + slack);
  }
}

TEST(ExpandSphere, CarriesCenterAndRadius) {
  const Point p = at(0, 0, 0, 3);
  const Sphere s = expand_sphere(p, 1.0);
  EXPECT_EQ(s.center.id, 3u);
  EXPECT_EQ(s.radius, 1.0);

  const Sphere t = expand_sphere(at(2, -1, 0, 9), 0.5);
  EXPECT_EQ(t.center.id, 9u);
  EXPECT_EQ(t.radius, 0.5);
}

TEST(ExpandSphere, RejectsNonPositiveRadius) {
  EXPECT_THROW(expand_sphere(at(0, 0, 0), 0.0), std::invalid_argument);
  EXPECT_THROW(expand_sphere(at(0, 0, 0), -1.0), std::invalid_argument);
  EXPECT_THROW(expand_sphere(at(0, 0, 0), std::nan("")), std::invalid_argument);
}

TEST(ExpandSphere, ThreeSphereConfigurationOverlapsAtQ) {
  const auto pts = testing::three_sphere_config();
  const double eps = 1.0;
  const Point& q = pts[1];
  for (const Point& p : pts) {
    const Sphere s = expand_sphere(p, eps);
    EXPECT_LE(distance(s.center, q), 2 * eps);
    EXPECT_TRUE(point_in_sphere(q, s));
  }
  EXPECT_FALSE(point_in_sphere(pts[0], expand_sphere(pts[2], eps)));
}

TEST(SphereAabb, Examples) {
  EXPECT_EQ(sphere_aabb(Sphere{at(0, 0, 0), 1.0}), (Aabb{{-1, -1, -1}, {1, 1, 1}}));
  EXPECT_EQ(sphere_aabb(Sphere{at(5, 0, 0), 2.0}), (Aabb{{3, -2, -2}, {7, 2, 2}}));
  EXPECT_EQ(sphere_aabb(Sphere{at(1, 1, 0), 0.25}), (Aabb{{0.75, 0.75, -0.25}, {1.25, 1.25, 0.25}}));
}

TEST(PointInAabb, BoundaryInclusive) {
  const Aabb box{{-1, -1, -1}, {1, 1, 1}};
  EXPECT_TRUE(point_in_aabb(at(0, 0, 0), box));
  EXPECT_TRUE(point_in_aabb(at(1, 0, 0), box));
  EXPECT_TRUE(point_in_aabb(at(-1, -1, -1), box));
  EXPECT_FALSE(point_in_aabb(at(2, 0, 0), box));
}

TEST(PointInSphere, BoundaryInclusive) {
  const Sphere unit{at(0, 0, 0), 1.0};
  EXPECT_TRUE(point_in_sphere(at(1, 0, 0), unit));
  EXPECT_FALSE(point_in_sphere(at(1.0001, 0, 0), unit));
  EXPECT_TRUE(point_in_sphere(at(0, 0, 0), unit));
}

TEST(Geometry, OverlapSymmetryAndContainmentChain) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> r(0.01, 1.5);
  for (int i = 0; i < 10000; ++i) {
    const Point a = at(u(rng), u(rng), i % 2 ? u(rng) : 0.0);
    const Point b = at(u(rng), u(rng), i % 2 ? u(rng) : 0.0);
    const double eps = r(rng);
    const Sphere sa = expand_sphere(a, eps);
    const Sphere sb = expand_sphere(b, eps);
    ASSERT_EQ(point_in_sphere(a, sb), point_in_sphere(b, sa));
    if (point_in_sphere(a, sb)) {
      ASSERT_TRUE(point_in_aabb(a, sphere_aabb(sb)));
    }
    if (point_in_sphere(b, sa)) {
      ASSERT_TRUE(point_in_aabb(b, sphere_aabb(sa)));
    }
  }
}

TEST(Params, Validation) {
  EXPECT_NO_THROW((Params{0.1, 1}.validate()));
  EXPECT_THROW((Params{0.0, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((Params{-1.0, 5}.validate()), std::invalid_argument);
  EXPECT_THROW((Params{0.1, 0}.validate()), std::invalid_argument);
}

}  // namespace
}  // namespace rtdbscan
