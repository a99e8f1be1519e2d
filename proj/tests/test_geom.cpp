#include <cmath>

#include <gtest/gtest.h>

#include "occsurf/bvh.hpp"
#include "occsurf/config.hpp"
#include "occsurf/geom.hpp"
#include "occsurf/mesh_io.hpp"
#include "occsurf/primitives.hpp"
#include "occsurf/rng.hpp"
#include "support.hpp"

using namespace occsurf;

TEST(Pose, LookAtPointsForwardAtTarget) {
  const Pose p = Pose::look_at(Vec3(1, 2, 3), Vec3(4, 2, 3));
  EXPECT_TRUE(p.forward().isApprox(Vec3::UnitX()));
  EXPECT_NEAR(p.rotation.determinant(), 1.0, 1e-12);
  // Image down (+y) points to world -z for a level camera.
  EXPECT_TRUE(p.rotation.col(1).isApprox(-Vec3::UnitZ()));
  EXPECT_THROW(Pose::look_at(Vec3(1, 1, 1), Vec3(1, 1, 1)), ArgumentError);
}

TEST(Pose, InverseAndCompose) {
  const Pose p = Pose::look_at(Vec3(0.3, -1, 2), Vec3(1, 1, 0));
  const Vec3 q(0.7, -0.2, 1.9);
  EXPECT_TRUE(p.inverse().apply(p.apply(q)).isApprox(q, 1e-12));
  EXPECT_TRUE((p * p.inverse()).translation.isZero(1e-12));
  EXPECT_THROW(Pose::from(2.0 * Mat3::Identity(), Vec3::Zero()), ArgumentError);
}

TEST(Aabb, SeparationSign) {
  const Aabb a(Vec3::Zero(), Vec3::Ones());
  EXPECT_NEAR(Aabb::separation(a, Aabb(Vec3(1.5, 0, 0), Vec3(2, 1, 1))), 0.5, 1e-12);
  EXPECT_LT(Aabb::separation(a, Aabb(Vec3(0.5, 0.5, 0.5), Vec3(2, 2, 2))), 0.0);
}

TEST(Primitives, BoxIsClosedAndOutward) {
  const auto box = make_box(Vec3::Zero(), Vec3(1, 2, 3));
  EXPECT_TRUE(is_watertight(box));
  EXPECT_EQ(euler_characteristic(box), 2);
  EXPECT_NEAR(support::signed_volume6(box) / 6.0, 6.0, 1e-12);
}

TEST(Primitives, IcosphereCounts) {
  const auto s = make_icosphere(Vec3::Zero(), 1.0, 3);
  EXPECT_EQ(s.num_triangles(), 20u * 64u);
  EXPECT_EQ(euler_characteristic(s), 2);
  for (const auto& v : s.vertices) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  EXPECT_GT(support::signed_volume6(s), 0);
}

TEST(Primitives, ShellEncloses) {
  const auto shell = make_box_shell(Vec3::Zero(), Vec3(3, 3, 2.5), 0.1);
  EXPECT_TRUE(is_watertight(shell));
  const Bvh bvh(shell);
  EXPECT_FALSE(bvh.inside(Vec3(1.5, 1.5, 1)));
  EXPECT_TRUE(bvh.inside(Vec3(-0.05, 1.5, 1)));
  EXPECT_NEAR(bvh.signed_distance(Vec3(1.5, 1.5, 1)), 1.0, 1e-9);
}

TEST(Triangle, ClosestPointRegions) {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  EXPECT_TRUE(closest_point_on_triangle(Vec3(0.2, 0.2, 1), a, b, c).isApprox(Vec3(0.2, 0.2, 0)));
  EXPECT_TRUE(closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c).isApprox(a));
  EXPECT_TRUE(closest_point_on_triangle(Vec3(1, 1, 0), a, b, c).isApprox(Vec3(0.5, 0.5, 0)));
}

TEST(Bvh, SingleTriangleMatchesDirectTest) {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)};
  m.triangles = {{0, 1, 2}};
  const Bvh bvh(m);
  EXPECT_EQ(bvh.nodes().size(), 1u);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 o(uniform(rng, -0.5, 1.5), uniform(rng, -0.5, 1.5), 0);
    const Vec3 d = Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), 1).normalized();
    const auto hit = bvh.ray_cast(o, d);
    const double t = intersect_triangle(o, d, m.vertices[0], m.vertices[1], m.vertices[2]);
    ASSERT_EQ(hit.has_value(), t > 0);
    if (hit) {
      EXPECT_DOUBLE_EQ(hit->t, t);
    }
  }
}

TEST(Bvh, RayHitsPlaneAtDistance) {
  const Bvh bvh(make_quad_z(-1, -1, 1, 1, 2.0));
  const auto hit = bvh.ray_cast(Vec3::Zero(), Vec3::UnitZ());
  ASSERT_TRUE(hit);
  EXPECT_DOUBLE_EQ(hit->t, 2.0);
  EXPECT_FALSE(bvh.ray_cast(Vec3::Zero(), -Vec3::UnitZ()));
  EXPECT_THROW(bvh.ray_cast(Vec3::Zero(), Vec3(0, 0, 2)), ArgumentError);
}

TEST(Bvh, GapBetweenBoxesMisses) {
  auto m = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1));
  m.append(make_box(Vec3(2, 0, 0), Vec3(3, 1, 1)));
  const Bvh bvh(m);
  const auto& root = bvh.nodes().front();
  ASSERT_FALSE(root.is_leaf());
  const auto& l = bvh.nodes()[root.first].box;
  const auto& r = bvh.nodes()[root.right].box;
  EXPECT_GT(Aabb::separation(l, r), 0.0);
  EXPECT_FALSE(bvh.ray_cast(Vec3(1.5, 0.5, -1), Vec3::UnitZ()));
}

TEST(Bvh, SphereRayDistance) {
  const double r = 0.5, d = 3.0;
  const auto sphere = make_icosphere(Vec3(0, 0, d), r, 5);
  const auto hit = Bvh(sphere).ray_cast(Vec3::Zero(), Vec3::UnitZ());
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, d - r, 1e-4 * r);
}

TEST(Bvh, RandomRaysMatchBruteForce) {
  auto m = make_icosphere(Vec3(0, 0, 0), 1.0, 2);
  m.append(make_box(Vec3(1.5, -0.5, -0.5), Vec3(2.5, 0.5, 0.5)));
  const Bvh bvh(m);
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const Vec3 o(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    const Vec3 dir = Vec3(normal(rng, 0, 1), normal(rng, 0, 1), normal(rng, 0, 1)).normalized();
    const auto a = bvh.ray_cast(o, dir), b = ray_cast_brute_force(m, o, dir);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_DOUBLE_EQ(a->t, b->t);
    }
    const auto ca = bvh.closest_point(o), cb = closest_point_brute_force(m, o);
    EXPECT_DOUBLE_EQ(ca.distance, cb.distance);
  }
}

TEST(Bvh, UnitCubeSignedDistance) {
  const Bvh bvh(make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5)));
  EXPECT_NEAR(bvh.signed_distance(Vec3::Zero()), -0.5, 1e-9);
  EXPECT_NEAR(bvh.signed_distance(Vec3(2, 0, 0)), 1.5, 1e-9);
}

TEST(Bvh, IcosphereSignedDistanceOracle) {
  const double r = 0.7;
  const Bvh bvh(make_icosphere(Vec3::Zero(), r, 5));
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
    EXPECT_NEAR(bvh.signed_distance(p), p.norm() - r, 2e-3 * r);
  }
}

TEST(Bvh, OpenMeshHasNoSign) {
  const Bvh bvh(make_quad_z(0, 0, 1, 1, 0));
  EXPECT_THROW(bvh.signed_distance(Vec3(0.5, 0.5, 1)), DataError);
  TriangleMesh empty;
  EXPECT_THROW(Bvh{empty}, DataError);
}

TEST(MeshIo, RoundTripTetrahedron) {
  TriangleMesh tet;
  tet.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  tet.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  const auto dir = support::temp_dir("meshio");
  for (const char* name : {"t.obj", "t.ply"}) {
    save_mesh(tet, dir / name);
    const auto back = load_mesh(dir / name);
    EXPECT_EQ(back.triangles, tet.triangles) << name;
    ASSERT_EQ(back.vertices.size(), tet.vertices.size());
    for (std::size_t i = 0; i < tet.vertices.size(); ++i) EXPECT_EQ(back.vertices[i], tet.vertices[i]) << name;
  }
}

TEST(MeshIo, ObjBadFaceIndex) {
  try {
    parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
}

TEST(MeshIo, AsciiPlyCube) {
  const std::string ply =
      "ply\nformat ascii 1.0\ncomment hand written\nelement vertex 8\nproperty float x\nproperty float y\n"
      "property float z\nelement face 12\nproperty list uchar int vertex_indices\nend_header\n"
      "0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n"
      "3 0 2 1\n3 0 3 2\n3 4 5 6\n3 4 6 7\n3 0 1 5\n3 0 5 4\n3 1 2 6\n3 1 6 5\n3 2 3 7\n3 2 7 6\n3 3 0 4\n3 3 4 7\n";
  const auto m = parse_ply(ply);
  EXPECT_EQ(m.vertices.size(), 8u);
  EXPECT_EQ(m.num_triangles(), 12u);
  EXPECT_TRUE(is_watertight(m));
  EXPECT_NEAR(support::signed_volume6(m), 6.0, 1e-12);
  EXPECT_THROW(parse_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0\n"), ParseError);
  EXPECT_THROW(parse_ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n0\n"), ParseError);
}

TEST(Config, RoundTripIsExact) {
  RunConfig c = RunConfig::desk();
  c.nn.sigma = 0.1 + 0.2;
  c.scene.seed = 0xfedcba9876543210ULL;
  const auto back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.nn.sigma, c.nn.sigma);
  EXPECT_EQ(back.scene.seed, c.scene.seed);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(parse_config("[train]\nepochz = 3\n"), Error);
  EXPECT_THROW(parse_config("[train]\nepochs = many\n"), Error);
}

TEST(Config, PresetsAndLearningRates) {
  const auto paper = RunConfig::paper();
  EXPECT_EQ(paper.octree.levels, 9);
  EXPECT_EQ(paper.octree.split, 4);
  EXPECT_EQ(paper.render.width, 1024);
  const auto desk = RunConfig::desk();
  EXPECT_NEAR(desk.octree_side(), 5.12, 1e-12);
  for (int level = 0; level <= desk.octree.split; ++level) EXPECT_DOUBLE_EQ(desk.feature_lr_at(level), 1e-3 * std::pow(0.5, level));
  EXPECT_THROW(RunConfig::from_preset("huge"), ArgumentError);
  RunConfig bad = desk;
  bad.octree.split = bad.octree.levels;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(Rng, DerivedSeedsAreIndependentOfOrder) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
}
