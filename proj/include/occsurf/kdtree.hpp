#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occsurf/geom.hpp"

namespace occsurf {

struct Neighbor {
  std::uint32_t index;  // into the point set the tree was built from
  double distance;
};

// Balanced 3-d tree (median splits on the widest axis), pruned by the
// bounding box of each node's points.
// Immutable after construction.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);

  // Exact nearest neighbour; ties resolve to the smaller index. Throws
  // DataError on an empty tree.
  Neighbor nearest(const Vec3& p) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    Aabb box;                  // bounds of the node's points
    std::uint32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = -1;  // -1 for leaves
    double split = 0;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

Neighbor nearest_brute_force(std::span<const Vec3> points, const Vec3& p);

// Distance used by both the tree and the brute-force reference.
inline double point_distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

}  // namespace occsurf
