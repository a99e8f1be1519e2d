#include "occsurf/octree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"
#include "occsurf/rng.hpp"

namespace occsurf {

namespace {

constexpr char kVolumeMagic[5] = "OSOV";
constexpr std::uint32_t kVolumeVersion = 1;
constexpr double kInitRange = 1e-2;

std::string describe(const Vec3& p) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "(%.6g, %.6g, %.6g)", p.x(), p.y(), p.z());
  return buf;
}

}  // namespace

std::uint64_t pack_key(const LatticeKey& k) {
  constexpr std::uint64_t mask = (1ULL << 21) - 1;
  return (static_cast<std::uint64_t>(k[0]) & mask) | ((static_cast<std::uint64_t>(k[1]) & mask) << 21) |
         ((static_cast<std::uint64_t>(k[2]) & mask) << 42);
}

void OctreeLayout::validate() const {
  if (levels < 1 || levels > 20) throw ArgumentError("octree levels must be in [1, 20]");
  if (split < 0 || split >= levels) throw ArgumentError("octree split level must be in [0, levels)");
  if (feature_dim < 1) throw ArgumentError("feature dimension must be >= 1");
  if (!(side > 0)) throw ArgumentError("octree side must be positive");
}

OctreeFeatureVolume::OctreeFeatureVolume(const OctreeLayout& layout) : layout_(layout) {
  layout_.validate();
  levels_.resize(layout_.num_levels());
  for (auto& l : levels_) l.features.resize(layout_.feature_dim, 0);
}

OctreeFeatureVolume OctreeFeatureVolume::build(std::span<const Vec3> points, const OctreeLayout& layout,
                                               std::uint64_t init_seed) {
  layout.validate();
  const Aabb box = layout.bounds();
  const int finest = layout.levels;
  const std::int32_t n = 1 << finest;
  std::vector<std::uint64_t> leaf_keys;
  leaf_keys.reserve(points.size());
  for (const Vec3& p : points) {
    if (!p.allFinite() || !box.contains(p)) {
      throw ArgumentError("point " + describe(p) + " lies outside the octree bounds");
    }
    LatticeKey k;
    for (int a = 0; a < 3; ++a) {
      k[a] = std::min(n - 1, static_cast<std::int32_t>(std::floor((p[a] - layout.origin[a]) / layout.cell_size(finest))));
    }
    leaf_keys.push_back(pack_key(k));
  }
  std::sort(leaf_keys.begin(), leaf_keys.end());
  leaf_keys.erase(std::unique(leaf_keys.begin(), leaf_keys.end()), leaf_keys.end());
  std::vector<std::vector<LatticeKey>> nodes(layout.num_levels());
  constexpr std::uint64_t mask = (1ULL << 21) - 1;
  for (std::uint64_t key : leaf_keys) {
    nodes[finest].push_back({static_cast<std::int32_t>(key & mask), static_cast<std::int32_t>((key >> 21) & mask),
                             static_cast<std::int32_t>((key >> 42) & mask)});
  }
  OctreeFeatureVolume volume(layout);
  volume.finalize(std::move(nodes));
  for (int level = 0; level < layout.num_levels(); ++level) {
    Rng rng(derive_seed(init_seed, 0x6f63, level));
    auto& f = volume.levels_[level].features;
    for (Eigen::Index c = 0; c < f.cols(); ++c)
      for (Eigen::Index r = 0; r < f.rows(); ++r) f(r, c) = uniform(rng, -kInitRange, kInitRange);
  }
  return volume;
}

OctreeFeatureVolume OctreeFeatureVolume::from_nodes(const std::vector<std::vector<LatticeKey>>& nodes,
                                                    const OctreeLayout& layout, std::uint64_t init_seed) {
  OctreeFeatureVolume volume(layout);
  if (static_cast<int>(nodes.size()) != layout.num_levels()) {
    throw ArgumentError("node list must have one entry per octree level");
  }
  for (int level = 0; level < layout.num_levels(); ++level) {
    const std::int32_t n = 1 << level;
    for (const auto& k : nodes[level])
      for (int a = 0; a < 3; ++a)
        if (k[a] < 0 || k[a] >= n) throw ArgumentError("node key out of range at level " + std::to_string(level));
  }
  volume.finalize(nodes);
  for (int level = 0; level < layout.num_levels(); ++level) {
    Rng rng(derive_seed(init_seed, 0x6f63, level));
    auto& f = volume.levels_[level].features;
    for (Eigen::Index c = 0; c < f.cols(); ++c)
      for (Eigen::Index r = 0; r < f.rows(); ++r) f(r, c) = uniform(rng, -kInitRange, kInitRange);
  }
  return volume;
}

void OctreeFeatureVolume::finalize(std::vector<std::vector<LatticeKey>> nodes) {
  // Close the node sets under the parent relation, finest to coarsest.
  for (int level = layout_.levels; level > 0; --level) {
    for (const auto& k : nodes[level]) nodes[level - 1].push_back({k[0] >> 1, k[1] >> 1, k[2] >> 1});
  }
  for (int level = 0; level < layout_.num_levels(); ++level) {
    auto& keys = nodes[level];
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    Level& l = levels_[level];
    l.nodes = keys;
    l.node_index.clear();
    l.node_index.reserve(keys.size() * 2);
    std::vector<LatticeKey> corners;
    corners.reserve(keys.size() * 8);
    for (std::uint32_t i = 0; i < keys.size(); ++i) {
      l.node_index.emplace(pack_key(keys[i]), i);
      for (int c = 0; c < 8; ++c) corners.push_back({keys[i][0] + (c & 1), keys[i][1] + ((c >> 1) & 1), keys[i][2] + ((c >> 2) & 1)});
    }
    std::sort(corners.begin(), corners.end());
    corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
    l.corner_keys = corners;
    l.node_corners.resize(keys.size());
    for (std::uint32_t i = 0; i < keys.size(); ++i) {
      for (int c = 0; c < 8; ++c) {
        const LatticeKey ck{keys[i][0] + (c & 1), keys[i][1] + ((c >> 1) & 1), keys[i][2] + ((c >> 2) & 1)};
        l.node_corners[i][c] =
            static_cast<std::uint32_t>(std::lower_bound(corners.begin(), corners.end(), ck) - corners.begin());
      }
    }
    l.features = Eigen::MatrixXd::Zero(layout_.feature_dim, static_cast<Eigen::Index>(corners.size()));
  }
}

bool OctreeFeatureVolume::occupied(int level, const LatticeKey& node) const {
  return levels_[level].node_index.count(pack_key(node)) > 0;
}

std::optional<std::uint32_t> OctreeFeatureVolume::corner_index(int level, const LatticeKey& corner) const {
  const auto& keys = levels_[level].corner_keys;
  auto it = std::lower_bound(keys.begin(), keys.end(), corner);
  if (it == keys.end() || *it != corner) return std::nullopt;
  return static_cast<std::uint32_t>(it - keys.begin());
}

std::optional<LevelSample> OctreeFeatureVolume::locate(int level, const Vec3& p) const {
  const double cell = layout_.cell_size(level);
  const std::int32_t n = 1 << level;
  LatticeKey key;
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double x = (p[a] - layout_.origin[a]) / cell;
    if (!(x >= 0.0 && x <= n)) return std::nullopt;
    std::int32_t i = static_cast<std::int32_t>(std::floor(x));
    if (i == n) i = n - 1;
    key[a] = i;
    t[a] = x - i;
  }
  const Level& l = levels_[level];
  auto it = l.node_index.find(pack_key(key));
  if (it == l.node_index.end()) return std::nullopt;
  LevelSample s;
  s.corners = l.node_corners[it->second];
  for (int c = 0; c < 8; ++c) {
    s.weights[c] = ((c & 1) ? t[0] : 1.0 - t[0]) * (((c >> 1) & 1) ? t[1] : 1.0 - t[1]) *
                   (((c >> 2) & 1) ? t[2] : 1.0 - t[2]);
  }
  return s;
}

PointLookup OctreeFeatureVolume::lookup(const Vec3& p) const {
  PointLookup out;
  out.levels.resize(layout_.num_levels());
  for (int level = 0; level < layout_.num_levels(); ++level) {
    out.levels[level] = locate(level, p);
    if (out.levels[level]) {
      out.presence |= 1u << level;
    } else {
      ++out.missing_layers;
    }
  }
  return out;
}

std::optional<Eigen::VectorXd> OctreeFeatureVolume::interpolate(int level, const Vec3& p) const {
  const auto s = locate(level, p);
  if (!s) return std::nullopt;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(layout_.feature_dim);
  for (int c = 0; c < 8; ++c) f += s->weights[c] * levels_[level].features.col(s->corners[c]);
  return f;
}

QueryResult OctreeFeatureVolume::query(const Vec3& p) const {
  QueryResult r;
  const int F = layout_.feature_dim;
  Eigen::VectorXd coarse = Eigen::VectorXd::Zero(layout_.coarse_width());
  Eigen::VectorXd fine = Eigen::VectorXd::Zero(layout_.fine_width());
  bool any_coarse = false, any_fine = false;
  for (int level = 0; level < layout_.num_levels(); ++level) {
    const auto f = interpolate(level, p);
    if (!f) {
      ++r.missing_layers;
      continue;
    }
    if (level <= layout_.split) {
      coarse.segment(level * F, F) = *f;
      any_coarse = true;
    } else {
      fine.segment((level - layout_.split - 1) * F, F) = *f;
      any_fine = true;
    }
  }
  if (any_coarse) r.coarse = std::move(coarse);
  if (any_fine) r.fine = std::move(fine);
  return r;
}

void OctreeFeatureVolume::accumulate_feature_gradient(int level, const Vec3& p, const Eigen::VectorXd& upstream,
                                                      Eigen::MatrixXd& grad) const {
  const auto s = locate(level, p);
  if (!s) throw DataError("no occupied node at level " + std::to_string(level) + " for point " + describe(p));
  for (int c = 0; c < 8; ++c) grad.col(s->corners[c]) += s->weights[c] * upstream;
}

void OctreeFeatureVolume::save(const std::filesystem::path& path) const {
  std::ostringstream os(std::ios::binary);
  write_magic(os, kVolumeMagic);
  write_le<std::uint32_t>(os, kVolumeVersion);
  for (int a = 0; a < 3; ++a) write_le<double>(os, layout_.origin[a]);
  write_le<double>(os, layout_.side);
  write_le<std::int32_t>(os, layout_.levels);
  write_le<std::int32_t>(os, layout_.split);
  write_le<std::int32_t>(os, layout_.feature_dim);
  for (const Level& l : levels_) {
    write_le<std::uint64_t>(os, l.nodes.size());
    for (const auto& k : l.nodes)
      for (int a = 0; a < 3; ++a) write_le<std::int32_t>(os, k[a]);
    write_le<std::uint64_t>(os, l.corner_keys.size());
    for (std::size_t c = 0; c < l.corner_keys.size(); ++c) {
      for (int a = 0; a < 3; ++a) write_le<std::int32_t>(os, l.corner_keys[c][a]);
      for (int r = 0; r < layout_.feature_dim; ++r) write_le<float>(os, static_cast<float>(l.features(r, c)));
    }
  }
  write_file_atomic(path, os.str());
}

OctreeFeatureVolume OctreeFeatureVolume::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing volume checkpoint " + path.string());
  const std::string bytes = read_file(path);
  std::istringstream is(bytes, std::ios::binary);
  expect_magic(is, kVolumeMagic, path.string());
  if (read_le<std::uint32_t>(is, "volume version") != kVolumeVersion) {
    throw ParseError(path.string() + ": unsupported volume version");
  }
  OctreeLayout layout;
  for (int a = 0; a < 3; ++a) layout.origin[a] = read_le<double>(is, "origin");
  layout.side = read_le<double>(is, "side");
  layout.levels = read_le<std::int32_t>(is, "levels");
  layout.split = read_le<std::int32_t>(is, "split");
  layout.feature_dim = read_le<std::int32_t>(is, "feature dim");
  try {
    layout.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::vector<std::vector<LatticeKey>> nodes(layout.num_levels());
  std::vector<std::vector<LatticeKey>> corners(layout.num_levels());
  std::vector<std::vector<float>> values(layout.num_levels());
  for (int level = 0; level < layout.num_levels(); ++level) {
    const auto n_nodes = read_le<std::uint64_t>(is, "node count");
    if (n_nodes > bytes.size()) throw ParseError(path.string() + ": implausible node count");
    nodes[level].resize(n_nodes);
    for (auto& k : nodes[level])
      for (int a = 0; a < 3; ++a) k[a] = read_le<std::int32_t>(is, "node key");
    const auto n_corners = read_le<std::uint64_t>(is, "corner count");
    if (n_corners > bytes.size()) throw ParseError(path.string() + ": implausible corner count");
    corners[level].resize(n_corners);
    values[level].resize(n_corners * layout.feature_dim);
    for (std::size_t c = 0; c < n_corners; ++c) {
      for (int a = 0; a < 3; ++a) corners[level][c][a] = read_le<std::int32_t>(is, "corner key");
      for (int r = 0; r < layout.feature_dim; ++r) values[level][c * layout.feature_dim + r] = read_le<float>(is, "feature");
    }
  }
  OctreeFeatureVolume volume(layout);
  volume.finalize(nodes);
  for (int level = 0; level < layout.num_levels(); ++level) {
    if (volume.levels_[level].corner_keys != corners[level]) {
      throw ParseError(path.string() + ": corner set at level " + std::to_string(level) +
                       " is inconsistent with its nodes");
    }
    auto& f = volume.levels_[level].features;
    for (Eigen::Index c = 0; c < f.cols(); ++c)
      for (Eigen::Index r = 0; r < f.rows(); ++r) f(r, c) = values[level][c * layout.feature_dim + r];
  }
  return volume;
}

}  // namespace occsurf
