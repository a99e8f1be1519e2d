#include "occsurf/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "occsurf/error.hpp"

namespace occsurf {

TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  if (!((hi - lo).array() > 0).all()) throw ArgumentError("box must have positive extent");
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  // Quads listed counter-clockwise seen from outside.
  const int quads[6][4] = {
      {0, 2, 3, 1},  // -z
      {4, 5, 7, 6},  // +z
      {0, 1, 5, 4},  // -y
      {2, 6, 7, 3},  // +y
      {0, 4, 6, 2},  // -x
      {1, 3, 7, 5},  // +x
  };
  for (const auto& q : quads) {
    m.triangles.push_back({std::uint32_t(q[0]), std::uint32_t(q[1]), std::uint32_t(q[2])});
    m.triangles.push_back({std::uint32_t(q[0]), std::uint32_t(q[2]), std::uint32_t(q[3])});
  }
  return m;
}

TriangleMesh make_prism(const Vec3& base, double radius, double height, int sides) {
  if (sides < 3 || radius <= 0 || height <= 0) throw ArgumentError("invalid prism parameters");
  TriangleMesh m;
  for (int level = 0; level < 2; ++level) {
    for (int i = 0; i < sides; ++i) {
      const double a = 2.0 * std::numbers::pi * i / sides;
      m.vertices.emplace_back(base.x() + radius * std::cos(a), base.y() + radius * std::sin(a),
                              base.z() + level * height);
    }
  }
  const auto bottom_center = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back(base);
  m.vertices.push_back(base + Vec3(0, 0, height));
  const auto top_center = bottom_center + 1;
  for (int i = 0; i < sides; ++i) {
    const auto a = static_cast<std::uint32_t>(i), b = static_cast<std::uint32_t>((i + 1) % sides);
    const auto at = a + sides, bt = b + sides;
    m.triangles.push_back({a, b, bt});
    m.triangles.push_back({a, bt, at});
    m.triangles.push_back({bottom_center, b, a});
    m.triangles.push_back({top_center, at, bt});
  }
  return m;
}

TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> unit = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                            {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : unit) v.normalize();
  std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      unit.push_back((unit[a] + unit[b]).normalized());
      const auto idx = static_cast<std::uint32_t>(unit.size() - 1);
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& tri : tris) {
      const auto ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  TriangleMesh m;
  m.vertices.reserve(unit.size());
  for (const auto& u : unit) m.vertices.push_back(center + radius * u);
  m.triangles = std::move(tris);
  return m;
}

TriangleMesh make_box_shell(const Vec3& inner_min, const Vec3& inner_max, double thickness) {
  if (thickness <= 0) throw ArgumentError("shell thickness must be positive");
  TriangleMesh shell = make_box(inner_min.array() - thickness, inner_max.array() + thickness);
  TriangleMesh inner = make_box(inner_min, inner_max);
  for (auto& t : inner.triangles) std::swap(t[1], t[2]);
  shell.append(inner);
  return shell;
}

TriangleMesh make_quad_z(double x0, double y0, double x1, double y1, double height) {
  TriangleMesh m;
  m.vertices = {{x0, y0, height}, {x1, y0, height}, {x1, y1, height}, {x0, y1, height}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

}  // namespace occsurf
