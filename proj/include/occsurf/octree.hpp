#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "occsurf/geom.hpp"

namespace occsurf {

struct OctreeLayout {
  Vec3 origin = Vec3::Constant(-0.2);
  double side = 5.12;  // cube side = 2^levels * finest voxel size
  int levels = 7;      // L; levels 0..L
  int split = 3;       // j; coarse levels 0..j, fine levels j+1..L
  int feature_dim = 12;

  void validate() const;
  double cell_size(int level) const { return side / static_cast<double>(1 << level); }
  int num_levels() const { return levels + 1; }
  int coarse_width() const { return (split + 1) * feature_dim; }
  int fine_width() const { return (levels - split) * feature_dim; }
  Aabb bounds() const { return {origin, origin + Vec3::Constant(side)}; }
};

using LatticeKey = std::array<std::int32_t, 3>;

// Node-local sampling of one level: the 8 corner slots (index
// dx + 2 dy + 4 dz) and their trilinear weights.
struct LevelSample {
  std::array<std::uint32_t, 8> corners;
  std::array<double, 8> weights;
};

// Per-level result of a point lookup. Levels are stored ascending.
struct PointLookup {
  std::vector<std::optional<LevelSample>> levels;
  int missing_layers = 0;
  // Bit i set when level i retrieved features.
  std::uint32_t presence = 0;
};

struct QueryResult {
  std::optional<Eigen::VectorXd> coarse;  // (j+1)F, level-ascending, zeros for absent levels
  std::optional<Eigen::VectorXd> fine;    // (L-j)F, same layout
  int missing_layers = 0;
};

// Sparse hierarchical octree with learnable features at node corners.
// Node and corner indices are assigned in sorted lattice order, so identical
// inputs produce identical layouts.
class OctreeFeatureVolume {
 public:
  OctreeFeatureVolume() = default;
  explicit OctreeFeatureVolume(const OctreeLayout& layout);

  // Marks the containing node of every point at every level and initializes
  // corner features i.i.d. U[-1e-2, 1e-2]. Throws ArgumentError naming the
  // first point outside the bounds.
  static OctreeFeatureVolume build(std::span<const Vec3> points, const OctreeLayout& layout,
                                   std::uint64_t init_seed);
  // Builds from explicit per-level node sets (parents are added as needed).
  static OctreeFeatureVolume from_nodes(const std::vector<std::vector<LatticeKey>>& nodes,
                                        const OctreeLayout& layout, std::uint64_t init_seed);

  const OctreeLayout& layout() const { return layout_; }
  std::size_t num_nodes(int level) const { return levels_[level].nodes.size(); }
  std::size_t num_corners(int level) const { return levels_[level].corner_keys.size(); }
  const std::vector<LatticeKey>& node_keys(int level) const { return levels_[level].nodes; }
  const std::vector<LatticeKey>& corner_keys(int level) const { return levels_[level].corner_keys; }
  bool occupied(int level, const LatticeKey& node) const;
  // Index of a corner at a level, if present.
  std::optional<std::uint32_t> corner_index(int level, const LatticeKey& corner) const;

  // Feature matrix of a level: feature_dim x num_corners, one column per corner.
  Eigen::MatrixXd& features(int level) { return levels_[level].features; }
  const Eigen::MatrixXd& features(int level) const { return levels_[level].features; }

  std::optional<LevelSample> locate(int level, const Vec3& p) const;
  PointLookup lookup(const Vec3& p) const;
  std::optional<Eigen::VectorXd> interpolate(int level, const Vec3& p) const;
  QueryResult query(const Vec3& p) const;

  // Adds weight_k * upstream to column corner_k of `grad` (a matrix shaped like
  // features(level)). Throws DataError when p's node at `level` is unoccupied.
  void accumulate_feature_gradient(int level, const Vec3& p, const Eigen::VectorXd& upstream,
                                   Eigen::MatrixXd& grad) const;

  // "OSOV", u32 version, origin 3 x f64, side f64, L, j, F as i32; then per
  // level u64 node count, sorted node keys (3 x i32), u64 corner count and
  // sorted corner records (3 x i32 key, F x f32 feature).
  void save(const std::filesystem::path& path) const;
  static OctreeFeatureVolume load(const std::filesystem::path& path);

 private:
  struct Level {
    std::vector<LatticeKey> nodes;        // sorted
    std::vector<LatticeKey> corner_keys;  // sorted
    std::vector<std::array<std::uint32_t, 8>> node_corners;
    std::unordered_map<std::uint64_t, std::uint32_t> node_index;
    Eigen::MatrixXd features;
  };
  void finalize(std::vector<std::vector<LatticeKey>> nodes);

  OctreeLayout layout_;
  std::vector<Level> levels_;
};

std::uint64_t pack_key(const LatticeKey& k);

}  // namespace occsurf
