#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "occsurf/bvh.hpp"
#include "occsurf/geom.hpp"

namespace occsurf {

enum class FurnitureKind { Box, Prism, Table };

std::string to_string(FurnitureKind kind);
FurnitureKind furniture_kind_from_string(const std::string& name);

struct FurnitureItem {
  FurnitureKind kind;
  Aabb bounds;  // world-space bounding box; bounds.min.z() == 0 (on the floor)
};

// Room interior is [0, size_x] x [0, size_y] x [0, height]; the floor is the
// plane z = 0 and walls have the given thickness outside the interior.
struct SceneSpec {
  std::uint64_t seed = 0;
  double size_x = 4.0;
  double size_y = 4.0;
  double height = 2.5;
  int furniture_count = 4;
  std::vector<FurnitureKind> kinds = {FurnitureKind::Table, FurnitureKind::Box, FurnitureKind::Prism};
  double wall_thickness = 0.1;
  // Minimum gap between furniture footprints and between furniture and walls.
  double clearance = 0.15;

  void validate() const;
};

struct Scene {
  SceneSpec spec;
  TriangleMesh complete;  // layout + furniture
  TriangleMesh layout;
  std::vector<FurnitureItem> furniture;
  Aabb interior() const { return {Vec3::Zero(), Vec3(spec.size_x, spec.size_y, spec.height)}; }
};

// Deterministic for a given spec. Throws DataError when furniture placement
// fails after 100 rejection-sampling attempts for one item.
Scene generate_scene(const SceneSpec& spec);

// Uniform Catmull-Rom segment between p1 (t = 0) and p2 (t = 1).
Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t);

struct Trajectory {
  std::vector<Vec3> positions;
  std::vector<Vec3> targets;  // look-at target per control point
  int samples_per_segment = 1;
  // Closed loops wrap control points; open curves use the n-3 interior segments.
  bool closed = false;
};

// One pose per sample at t = (k + 0.5) / samples_per_segment of each segment.
// When `scene` is given, every camera position must be outside all solids and
// at least `clearance` from any surface; violations throw DataError naming the
// segment.
std::vector<Pose> sample_trajectory(const Trajectory& trajectory, const Bvh* scene = nullptr,
                                    double clearance = 0.1);

// Closed loop above the furniture around the room centre, looking across and
// down toward the far side of the room.
Trajectory default_trajectory(const Scene& scene, int frames, double camera_height, double orbit_fraction,
                              double look_height = 0.35);

void save_scene_info(const Scene& scene, const std::string& role, const std::filesystem::path& path);
struct SceneInfo {
  SceneSpec spec;
  std::string role;
  std::vector<FurnitureItem> furniture;
};
SceneInfo load_scene_info(const std::filesystem::path& path);

}  // namespace occsurf
