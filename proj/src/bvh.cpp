#include "occsurf/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "occsurf/error.hpp"

namespace occsurf {

namespace {

void check_unit(const Vec3& dir) {
  if (!(std::abs(dir.norm() - 1.0) <= 1e-9)) {
    throw ArgumentError("ray direction must be unit length (|d| = " + std::to_string(dir.norm()) + ")");
  }
}

// Slab test; returns entry distance or +inf on miss.
double ray_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    double near = (box.min[k] - origin[k]) * inv_dir[k];
    double far = (box.max[k] - origin[k]) * inv_dir[k];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf (origin on a slab plane with zero direction) keeps the bound.
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

// Fixed parity directions: irrational-looking components so rays never run
// along box faces or through lattice-aligned edges of procedural scenes.
const Vec3 kParityDirs[3] = {
    Vec3(0.5773502691896258, 0.4082482904638631, 0.7071067811865476).normalized(),
    Vec3(-0.3178, 0.8419, -0.4362).normalized(),
    Vec3(0.6121, -0.2987, -0.7322).normalized(),
};

}  // namespace

Bvh::Bvh(const TriangleMesh& mesh, std::uint32_t max_leaf_size) : max_leaf_(std::max(1u, max_leaf_size)) {
  if (mesh.empty()) throw DataError("cannot build a BVH over an empty mesh");
  validate_indices(mesh);
  watertight_ = is_watertight(mesh);
  tris_.reserve(mesh.num_triangles());
  std::vector<Vec3> centroids;
  centroids.reserve(mesh.num_triangles());
  for (std::size_t i = 0; i < mesh.num_triangles(); ++i) {
    tris_.push_back({mesh.corner(i, 0), mesh.corner(i, 1), mesh.corner(i, 2)});
    centroids.push_back((tris_.back().a + tris_.back().b + tris_.back().c) / 3.0);
  }
  order_.resize(tris_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * tris_.size() / max_leaf_ + 1);
  build(0, static_cast<std::uint32_t>(order_.size()), centroids);
}

Aabb Bvh::tri_box(std::uint32_t tri) const {
  Aabb box;
  box.extend(tris_[tri].a);
  box.extend(tris_[tri].b);
  box.extend(tris_[tri].c);
  return box;
}

std::uint32_t Bvh::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(tri_box(order_[i]));
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  const std::uint32_t n = end - begin;
  if (n <= max_leaf_) {
    nodes_[index].first = begin;
    nodes_[index].count = n;
    return index;
  }
  int axis = 0;
  centroid_box.extent().maxCoeff(&axis);
  const std::uint32_t mid = begin + n / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis], cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::uint32_t left = build(begin, mid, centroids);
  const std::uint32_t right = build(mid, end, centroids);
  nodes_[index].first = left;
  nodes_[index].right = right;
  return index;
}

std::optional<RayHit> Bvh::ray_cast(const Vec3& origin, const Vec3& dir, double t_max) const {
  check_unit(dir);
  const Vec3 inv_dir = dir.cwiseInverse();
  double best_t = t_max;
  std::int64_t best_tri = -1;
  std::uint32_t stack[128];
  int top = 0;
  if (ray_box(nodes_[0].box, origin, inv_dir, best_t) == std::numeric_limits<double>::infinity()) return std::nullopt;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto tri = order_[i];
        const double t = intersect_triangle(origin, dir, tris_[tri].a, tris_[tri].b, tris_[tri].c);
        if (t > 0.0 && (t < best_t || (t == best_t && (best_tri < 0 || static_cast<std::int64_t>(tri) < best_tri)))) {
          best_t = t;
          best_tri = tri;
        }
      }
      continue;
    }
    const double tl = ray_box(nodes_[node.first].box, origin, inv_dir, best_t);
    const double tr = ray_box(nodes_[node.right].box, origin, inv_dir, best_t);
    // Push the farther child first so the nearer one is visited next.
    if (tl <= tr) {
      if (tr != std::numeric_limits<double>::infinity()) stack[top++] = node.right;
      if (tl != std::numeric_limits<double>::infinity()) stack[top++] = node.first;
    } else {
      if (tl != std::numeric_limits<double>::infinity()) stack[top++] = node.first;
      if (tr != std::numeric_limits<double>::infinity()) stack[top++] = node.right;
    }
  }
  if (best_tri < 0) return std::nullopt;
  const Tri& t = tris_[best_tri];
  return RayHit{best_t, static_cast<std::uint32_t>(best_tri), (t.b - t.a).cross(t.c - t.a).normalized()};
}

int Bvh::count_crossings(const Vec3& origin, const Vec3& dir) const {
  const Vec3 inv_dir = dir.cwiseInverse();
  const double inf = std::numeric_limits<double>::infinity();
  int count = 0;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (ray_box(node.box, origin, inv_dir, inf) == inf) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto tri = order_[i];
        if (intersect_triangle(origin, dir, tris_[tri].a, tris_[tri].b, tris_[tri].c) > 0.0) ++count;
      }
      continue;
    }
    stack[top++] = node.first;
    stack[top++] = node.right;
  }
  return count;
}

ClosestPoint Bvh::closest_point(const Vec3& p) const {
  ClosestPoint best{std::numeric_limits<double>::infinity(), 0, Vec3::Zero()};
  double best_sq = std::numeric_limits<double>::infinity();
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  queue.emplace(nodes_[0].box.squared_distance(p), 0);
  while (!queue.empty()) {
    const auto [dist_sq, idx] = queue.top();
    queue.pop();
    if (dist_sq > best_sq) break;
    const Node& node = nodes_[idx];
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto tri = order_[i];
        const Vec3 q = closest_point_on_triangle(p, tris_[tri].a, tris_[tri].b, tris_[tri].c);
        const double d = (q - p).squaredNorm();
        if (d < best_sq || (d == best_sq && tri < best.triangle)) {
          best_sq = d;
          best.triangle = tri;
          best.point = q;
        }
      }
      continue;
    }
    const double dl = nodes_[node.first].box.squared_distance(p);
    const double dr = nodes_[node.right].box.squared_distance(p);
    if (dl <= best_sq) queue.emplace(dl, node.first);
    if (dr <= best_sq) queue.emplace(dr, node.right);
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

bool Bvh::inside(const Vec3& p) const {
  int votes = 0;
  for (const auto& dir : kParityDirs) votes += count_crossings(p, dir) & 1;
  return votes >= 2;
}

double Bvh::signed_distance(const Vec3& p) const {
  if (!watertight_) throw DataError("signed distance requires a watertight mesh");
  const double d = closest_point(p).distance;
  return inside(p) ? -d : d;
}

std::optional<RayHit> ray_cast_brute_force(const TriangleMesh& mesh, const Vec3& origin, const Vec3& dir,
                                           double t_max) {
  double best_t = t_max;
  std::int64_t best_tri = -1;
  for (std::size_t i = 0; i < mesh.num_triangles(); ++i) {
    const double t = intersect_triangle(origin, dir, mesh.corner(i, 0), mesh.corner(i, 1), mesh.corner(i, 2));
    if (t > 0.0 && (t < best_t || (best_tri < 0 && t == best_t))) {
      best_t = t;
      best_tri = static_cast<std::int64_t>(i);
    }
  }
  if (best_tri < 0) return std::nullopt;
  return RayHit{best_t, static_cast<std::uint32_t>(best_tri), mesh.face_normal(best_tri)};
}

ClosestPoint closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p) {
  ClosestPoint best{std::numeric_limits<double>::infinity(), 0, Vec3::Zero()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.num_triangles(); ++i) {
    const Vec3 q = closest_point_on_triangle(p, mesh.corner(i, 0), mesh.corner(i, 1), mesh.corner(i, 2));
    const double d = (q - p).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best.triangle = static_cast<std::uint32_t>(i);
      best.point = q;
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

}  // namespace occsurf
