#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "slg/geometry.hpp"

using slg::Polygon;
using slg::Vec2;

namespace {

Polygon unit_square() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

// Star-shaped polygon around `c`: sorted angles, random radii. Simple by
// construction.
Polygon random_star(std::mt19937_64& rng, Vec2 c, int n, double rmin, double rmax) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), rad(rmin, rmax);
  std::vector<double> angles(n);
  for (auto& a : angles) a = ang(rng);
  std::sort(angles.begin(), angles.end());
  Polygon p;
  for (double a : angles) {
    const double r = rad(rng);
    p.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return p;
}

// Convex polygon: a regular n-gon with jittered angles, counter-clockwise.
Polygon random_convex(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  Polygon p;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * (i + 0.5 + jitter(rng)) / n;
    p.push_back({5.0 + 4.0 * std::cos(a), 5.0 + 4.0 * std::sin(a)});
  }
  return p;
}

// Oracle for convex counter-clockwise polygons: inside iff left of (or on)
// every edge.
bool half_plane_inside(Vec2 q, const Polygon& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2 a = p[i], b = p[(i + 1) % p.size()];
    if ((b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x) < 0.0) return false;
  }
  return true;
}

// Oracle: minimum distance to densely sampled boundary points.
double sampled_boundary_distance(Vec2 q, const Polygon& p, double step) {
  double best = 1e300;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2 a = p[i], b = p[(i + 1) % p.size()];
    const double len = slg::distance(a, b);
    const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int k = 0; k <= n; ++k) best = std::min(best, slg::distance(q, a + (double(k) / n) * (b - a)));
  }
  return best;
}

// Oracle: parametric solve of every non-adjacent edge pair.
bool brute_force_self_intersects(const Polygon& p) {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      const Vec2 a = p[i], b = p[(i + 1) % n], c = p[j], d = p[(j + 1) % n];
      const double den = (b.x - a.x) * (d.y - c.y) - (b.y - a.y) * (d.x - c.x);
      if (den == 0.0) continue;
      const double t = ((c.x - a.x) * (d.y - c.y) - (c.y - a.y) * (d.x - c.x)) / den;
      const double u = ((c.x - a.x) * (b.y - a.y) - (c.y - a.y) * (b.x - a.x)) / den;
      if (t >= 0 && t <= 1 && u >= 0 && u <= 1) return true;
    }
  return false;
}

}  // namespace

TEST(PointInPolygon, CenterOfUnitSquareIsInside) {
  EXPECT_TRUE(slg::point_in_polygon({0.5, 0.5}, unit_square()));
}

TEST(PointInPolygon, FarPointIsOutside) { EXPECT_FALSE(slg::point_in_polygon({2, 2}, unit_square())); }

TEST(PointInPolygon, BoundaryCountsAsInside) {
  EXPECT_TRUE(slg::point_in_polygon({0.5, 0.0}, unit_square()));
  EXPECT_TRUE(slg::point_in_polygon({1.0, 1.0}, unit_square()));
  EXPECT_FALSE(slg::point_in_polygon({1.0 + 1e-12, 0.5}, unit_square()));
}

TEST(PointInPolygon, MatchesHalfPlaneOracleOnConvexPolygons) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 5; ++trial) {
    const Polygon poly = random_convex(rng, 3 + trial * 2);
    ASSERT_GT(slg::signed_area(poly), 0.0);
    for (int i = 0; i < 1000; ++i) {
      const Vec2 q{u(rng), u(rng)};
      EXPECT_EQ(slg::point_in_polygon(q, poly), half_plane_inside(q, poly)) << q.x << "," << q.y;
    }
  }
}

TEST(SignedDistance, SquareCenterAndOutsidePoint) {
  const Polygon sq{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  EXPECT_DOUBLE_EQ(slg::signed_distance({1, 1}, sq), -1.0);
  EXPECT_DOUBLE_EQ(slg::signed_distance({5, 1}, sq), 3.0);
  EXPECT_DOUBLE_EQ(slg::signed_distance({2, 1}, sq), 0.0);
}

TEST(SignedDistance, MatchesBoundarySamplingOracle) {
  std::mt19937_64 rng(5);
  const Polygon poly = random_star(rng, {10, 10}, 9, 2.0, 6.0);
  ASSERT_TRUE(slg::is_simple_polygon(poly));
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int i = 0; i < 500; ++i) {
    const Vec2 q{u(rng), u(rng)};
    const double sd = slg::signed_distance(q, poly);
    EXPECT_NEAR(std::abs(sd), sampled_boundary_distance(q, poly, 0.005), 0.01);
    if (sd < 0) EXPECT_TRUE(slg::point_in_polygon(q, poly));
    if (sd > 0) EXPECT_FALSE(slg::point_in_polygon(q, poly));
  }
}

TEST(SimplePolygon, BowTieIsRejected) {
  const Polygon bow{{0, 0}, {4, 4}, {4, 0}, {0, 4}};
  EXPECT_TRUE(brute_force_self_intersects(bow));
  EXPECT_FALSE(slg::is_simple_polygon(bow));
}

TEST(SimplePolygon, AgreesWithParametricOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  int simple = 0, complex = 0;
  for (int trial = 0; trial < 400; ++trial) {
    Polygon p(3 + trial % 4);
    for (auto& v : p) v = {u(rng), u(rng)};
    const bool oracle = !brute_force_self_intersects(p);
    EXPECT_EQ(slg::is_simple_polygon(p), oracle);
    (oracle ? simple : complex)++;
  }
  EXPECT_GT(simple, 50);
  EXPECT_GT(complex, 50);
}

TEST(SimplePolygon, DegenerateShapes) {
  EXPECT_FALSE(slg::is_simple_polygon(Polygon{{0, 0}, {1, 1}}));
  EXPECT_FALSE(slg::is_simple_polygon(Polygon{{0, 0}, {1, 1}, {2, 2}}));
  EXPECT_TRUE(slg::is_simple_polygon(unit_square()));
}

TEST(Geometry, DiameterAndSegmentBlocking) {
  const Polygon sq{{0, 0}, {3, 0}, {3, 4}, {0, 4}};
  EXPECT_DOUBLE_EQ(slg::polygon_diameter(sq), 5.0);
  EXPECT_TRUE(slg::segment_hits_polygon({-1, 2}, {5, 2}, sq));
  EXPECT_FALSE(slg::segment_hits_polygon({-1, 5}, {5, 5}, sq));
}
