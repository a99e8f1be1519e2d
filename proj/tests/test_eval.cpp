#include <cmath>

#include <gtest/gtest.h>

#include "occsurf/error.hpp"
#include "occsurf/eval.hpp"
#include "occsurf/kdtree.hpp"
#include "occsurf/primitives.hpp"
#include "support.hpp"

using namespace occsurf;

namespace {

std::vector<Vec3> random_points(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return pts;
}

// A random box or sphere, seed-dependent.
TriangleMesh random_mesh(std::uint64_t seed) {
  Rng rng(seed);
  const Vec3 c(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
  if (uniform_index(rng, 2) == 0) return make_icosphere(c, uniform(rng, 0.3, 0.6), 3);
  const Vec3 h(uniform(rng, 0.2, 0.6), uniform(rng, 0.2, 0.6), uniform(rng, 0.2, 0.6));
  return make_box(c - h, c + h);
}

TriangleMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriangleMesh m;
  m.vertices = {a, b, c};
  m.triangles = {{0, 1, 2}};
  return m;
}

}  // namespace

TEST(KdTree, MatchesBruteForceBitwise) {
  const auto pts = random_points(1000, 1);
  const KdTree tree(pts);
  for (const auto& q : random_points(1000, 2)) {
    const auto a = tree.nearest(q), b = nearest_brute_force(pts, q);
    EXPECT_EQ(a.index, b.index);
    EXPECT_EQ(a.distance, b.distance);
  }
}

TEST(KdTree, ClusteredAndDuplicatePoints) {
  auto pts = random_points(300, 3);
  for (int i = 0; i < 300; ++i) pts.push_back(pts[i]);
  for (int i = 0; i < 200; ++i) pts.push_back(Vec3(0.5, 0.5, 0.5 + 1e-9 * i));
  const KdTree tree(pts);
  for (const auto& q : random_points(500, 4)) {
    const auto a = tree.nearest(q), b = nearest_brute_force(pts, q);
    EXPECT_EQ(a.index, b.index);
    EXPECT_EQ(a.distance, b.distance);
  }
}

TEST(KdTree, SingletonAndStoredPoint) {
  const std::vector<Vec3> one{Vec3(1, 2, 3)};
  const KdTree tree(one);
  const auto n = tree.nearest(Vec3(-4, 0, 9));
  EXPECT_EQ(n.index, 0u);
  EXPECT_EQ(n.distance, (Vec3(-4, 0, 9) - Vec3(1, 2, 3)).norm());

  const auto pts = random_points(100, 5);
  const KdTree t2(pts);
  EXPECT_EQ(t2.nearest(pts[37]).distance, 0.0);
  EXPECT_EQ(t2.nearest(pts[37]).index, 37u);
}

TEST(KdTree, EmptyTreeThrows) {
  const std::vector<Vec3> none;
  const KdTree tree(none);
  EXPECT_THROW(tree.nearest(Vec3::Zero()), DataError);
}

TEST(Metrics, F1ReproducesPrintedRows) {
  EXPECT_NEAR(f1_score(84.3, 65.8), 73.9, 0.05);
  EXPECT_NEAR(f1_score(92.1, 66.2), 77.0, 0.05);
  EXPECT_EQ(f1_score(0, 0), 0.0);
}

TEST(Metrics, IdenticalMeshesScorePerfect) {
  const auto m = make_icosphere(Vec3::Zero(), 1.0, 3);
  MetricsOptions o;
  o.n = 5000;
  const auto r = compute_metrics(m, m, o);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_EQ(r.completeness, 100.0);
  EXPECT_EQ(r.f1, 100.0);
}

TEST(Metrics, TranslatedPlaneScoresZero) {
  const auto gt = make_quad_z(0, 0, 1, 1, 0.0);
  const auto pred = make_quad_z(0, 0, 1, 1, 0.05);
  MetricsOptions o;
  o.n = 5000;
  const auto r = compute_metrics(pred, gt, o);
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_EQ(r.completeness, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Metrics, EmptyPredictionScoresZero) {
  MetricsOptions o;
  o.n = 1000;
  const auto r = compute_metrics(TriangleMesh{}, make_quad_z(0, 0, 1, 1, 0), o);
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_EQ(r.completeness, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Metrics, NonPositiveSampleCountThrows) {
  MetricsOptions o;
  o.n = 0;
  const auto m = make_quad_z(0, 0, 1, 1, 0);
  EXPECT_THROW(compute_metrics(m, m, o), ArgumentError);
}

TEST(Metrics, SymmetryOnRandomPairs) {
  MetricsOptions o;
  o.n = 2000;
  o.threshold = 0.05;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_mesh(2 * s + 100), b = random_mesh(2 * s + 101);
    const auto ab = compute_metrics(a, b, o), ba = compute_metrics(b, a, o);
    EXPECT_EQ(ab.accuracy, ba.completeness);
    EXPECT_EQ(ab.completeness, ba.accuracy);
    EXPECT_EQ(ab.f1, ba.f1);
  }
}

TEST(Metrics, ThresholdMonotonicity) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_mesh(2 * s + 300), b = random_mesh(2 * s + 301);
    MetricsReport prev;
    for (double t : {0.005, 0.01, 0.025, 0.05, 0.1, 0.2}) {
      MetricsOptions o;
      o.n = 2000;
      o.threshold = t;
      const auto r = compute_metrics(a, b, o);
      EXPECT_GE(r.accuracy, prev.accuracy);
      EXPECT_GE(r.completeness, prev.completeness);
      EXPECT_GE(r.f1, prev.f1);
      prev = r;
    }
  }
}

TEST(Metrics, F1IdentityAndRange) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    MetricsOptions o;
    o.n = 2000;
    const auto r = compute_metrics(random_mesh(s + 500), random_mesh(s + 600), o);
    for (double v : {r.accuracy, r.completeness, r.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    const double f1 = r.accuracy + r.completeness > 0 ? 2 * r.accuracy * r.completeness / (r.accuracy + r.completeness) : 0;
    EXPECT_NEAR(r.f1, f1, 1e-12);
  }
}

TEST(SampleSurface, AreaWeighting) {
  const double a = std::sqrt(2.0), b = std::sqrt(6.0);
  auto m = triangle(Vec3(0, 0, 0), Vec3(a, 0, 0), Vec3(0, a, 0));
  m.append(triangle(Vec3(0, 0, 1), Vec3(b, 0, 1), Vec3(0, b, 1)));
  const int n = 40000;
  const auto pts = sample_surface(m, n, 3);
  ASSERT_EQ(pts.size(), static_cast<std::size_t>(n));
  int small = 0;
  for (const auto& p : pts) small += p.z() < 0.5;
  const double mean = 0.25 * n, sd = std::sqrt(n * 0.25 * 0.75);
  EXPECT_LT(std::abs(small - mean), 3 * sd);
}

TEST(SampleSurface, PointsLieOnSurface) {
  const auto m = make_box(Vec3(-1, -2, 0), Vec3(1, 0.5, 3));
  const Bvh bvh(m);
  for (const auto& p : sample_surface(m, 2000, 4)) EXPECT_LE(bvh.closest_point(p).distance, 1e-9);
  const auto one = sample_surface(triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)), 1, 5);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].z(), 0.0);
  EXPECT_GE(one[0].x(), 0.0);
  EXPECT_GE(one[0].y(), 0.0);
  EXPECT_LE(one[0].x() + one[0].y(), 1.0 + 1e-12);
}

TEST(SampleSurface, DeterministicAndEmptyThrows) {
  const auto m = make_icosphere(Vec3::Zero(), 1, 2);
  EXPECT_EQ(sample_surface(m, 500, 9), sample_surface(m, 500, 9));
  EXPECT_THROW(sample_surface(TriangleMesh{}, 10, 1), DataError);
}

TEST(Metrics, CropKeepsTrianglesByCentroid) {
  auto m = make_quad_z(0, 0, 1, 1, 0);
  m.append(make_quad_z(5, 5, 6, 6, 0));
  const auto c = crop_mesh(m, Aabb(Vec3(-0.1, -0.1, -0.1), Vec3(1.1, 1.1, 0.1)));
  EXPECT_EQ(c.num_triangles(), 2u);
  EXPECT_NEAR(c.total_area(), 1.0, 1e-12);
}

TEST(Metrics, UnderFurnitureRegionExcludesSolidContact) {
  // A box and a table-like slab standing on a floor quad.
  auto floor = make_quad_z(0, 0, 4, 4, 0);
  const FurnitureItem box{FurnitureKind::Box, Aabb(Vec3(0.5, 0.5, 0), Vec3(1.5, 1.5, 1))};
  const FurnitureItem table{FurnitureKind::Table, Aabb(Vec3(2.5, 2.5, 0), Vec3(3.5, 3.5, 0.5))};
  auto solid = make_box_shell(Vec3::Zero(), Vec3(4, 4, 3), 0.1);
  solid.append(make_box(box.bounds.min, box.bounds.max));
  solid.append(make_box(Vec3(2.5, 2.5, 0.45), Vec3(3.5, 3.5, 0.5)));
  const Bvh bvh(solid);
  const auto samples = sample_surface(floor, 20000, 6);
  const auto region = under_furniture_floor(samples, {box, table}, bvh);
  ASSERT_FALSE(region.empty());
  for (const auto& p : region) {
    EXPECT_GT(p.x(), 2.5);
    EXPECT_LT(p.x(), 3.5);
  }
  EXPECT_NEAR(static_cast<double>(region.size()) / samples.size(), 1.0 / 16, 0.01);
}

TEST(Metrics, RegionalCompleteness) {
  const std::vector<Vec3> region{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_EQ(regional_completeness(region, {Vec3(0, 0, 0.01)}, 0.025), 50.0);
  EXPECT_EQ(regional_completeness(region, {}, 0.025), 0.0);
  EXPECT_TRUE(std::isnan(regional_completeness({}, {Vec3::Zero()}, 0.025)));
}
