#include "occsurf/kdtree.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "occsurf/error.hpp"

namespace occsurf {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  Aabb box;
  for (std::uint32_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  nodes_.push_back({box, begin, end});
  if (end - begin <= kLeafSize) return id;
  int axis = 0;
  box.extent().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

Neighbor KdTree::nearest(const Vec3& p) const {
  if (points_.empty()) throw DataError("nearest-neighbour query on an empty tree");
  Neighbor best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
  // Pending nodes with the squared distance from p to their point bounds.
  struct Item {
    std::int32_t node;
    double bound;
  };
  // Depth is at most log2(n / leaf) + 1 and each level leaves one pending item.
  std::array<Item, 2 * 64> stack;
  int top = 0;
  stack[top++] = {0, nodes_[0].box.squared_distance(p)};
  double best_sq = std::numeric_limits<double>::infinity();
  while (top > 0) {
    const Item item = stack[--top];
    if (item.bound > best_sq) continue;
    const Node& n = nodes_[item.node];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double sq = (points_[idx] - p).squaredNorm();
        if (sq < best_sq || (sq == best_sq && idx < best.index)) {
          best_sq = sq;
          best.index = idx;
        }
      }
      continue;
    }
    Item a{n.left, nodes_[n.left].box.squared_distance(p)};
    Item b{n.right, nodes_[n.right].box.squared_distance(p)};
    if (a.bound < b.bound || (a.bound == b.bound && p[n.axis] < n.split)) std::swap(a, b);
    // Nearer child on top.
    if (a.bound <= best_sq) stack[top++] = a;
    if (b.bound <= best_sq) stack[top++] = b;
  }
  best.distance = point_distance(points_[best.index], p);
  return best;
}

Neighbor nearest_brute_force(std::span<const Vec3> points, const Vec3& p) {
  if (points.empty()) throw DataError("nearest-neighbour query on an empty point set");
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const double sq = (points[i] - p).squaredNorm();
    if (sq < best_sq) {
      best_sq = sq;
      best.index = i;
    }
  }
  best.distance = point_distance(points[best.index], p);
  return best;
}

}  // namespace occsurf
