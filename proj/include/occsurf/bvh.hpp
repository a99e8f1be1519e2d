#pragma once

#include <optional>
#include <vector>

#include "occsurf/geom.hpp"

namespace occsurf {

struct RayHit {
  double t;
  std::uint32_t triangle;
  Vec3 normal;  // geometric face normal, unit
};

struct ClosestPoint {
  double distance;
  std::uint32_t triangle;
  Vec3 point;
};

// Axis-aligned bounding volume hierarchy over the triangles of a mesh.
// Stores its own copy of triangle corners, so it stays valid independently of
// the source mesh. Immutable after construction; const queries are safe from
// concurrent readers.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: offset into order_; interior: left child
    std::uint32_t count = 0;  // leaf: triangle count; interior: 0
    std::uint32_t right = 0;  // interior: right child
    bool is_leaf() const { return count > 0; }
  };

  // Throws DataError on an empty mesh or out-of-range indices.
  explicit Bvh(const TriangleMesh& mesh, std::uint32_t max_leaf_size = 4);

  // Nearest hit with t in (0, t_max]. `dir` must be unit length to 1e-9.
  std::optional<RayHit> ray_cast(const Vec3& origin, const Vec3& dir,
                                 double t_max = std::numeric_limits<double>::infinity()) const;
  // Number of triangle crossings along the open ray (t > 0).
  int count_crossings(const Vec3& origin, const Vec3& dir) const;
  ClosestPoint closest_point(const Vec3& p) const;
  // Signed distance; negative inside. Sign from ray parity along three fixed
  // non-axis-aligned directions with majority vote. Throws DataError when the
  // source mesh was not watertight.
  double signed_distance(const Vec3& p) const;
  bool inside(const Vec3& p) const;

  bool watertight() const { return watertight_; }
  std::size_t num_triangles() const { return tris_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& order() const { return order_; }
  const Aabb& bounds() const { return nodes_.front().box; }

 private:
  struct Tri {
    Vec3 a, b, c;
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);
  Aabb tri_box(std::uint32_t tri) const;

  std::vector<Tri> tris_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::uint32_t max_leaf_;
  bool watertight_ = false;
};

// Brute-force references, used by tests as oracles.
std::optional<RayHit> ray_cast_brute_force(const TriangleMesh& mesh, const Vec3& origin, const Vec3& dir,
                                           double t_max = std::numeric_limits<double>::infinity());
ClosestPoint closest_point_brute_force(const TriangleMesh& mesh, const Vec3& p);

}  // namespace occsurf
