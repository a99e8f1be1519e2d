#include "occsurf/scenegen.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"
#include "occsurf/primitives.hpp"
#include "occsurf/rng.hpp"

namespace occsurf {

std::string to_string(FurnitureKind kind) {
  switch (kind) {
    case FurnitureKind::Box:
      return "box";
    case FurnitureKind::Prism:
      return "prism";
    case FurnitureKind::Table:
      return "table";
  }
  return "unknown";
}

FurnitureKind furniture_kind_from_string(const std::string& name) {
  if (name == "box") return FurnitureKind::Box;
  if (name == "prism") return FurnitureKind::Prism;
  if (name == "table") return FurnitureKind::Table;
  throw ParseError("unknown furniture kind '" + name + "'");
}

void SceneSpec::validate() const {
  if (size_x < 1.0 || size_y < 1.0 || height < 1.0) throw ArgumentError("room extents must be at least 1 m");
  if (furniture_count < 0 || furniture_count > 10) throw ArgumentError("furniture count must be in [0, 10]");
  if (furniture_count > 0 && kinds.empty()) throw ArgumentError("furniture kind set is empty");
  if (wall_thickness <= 0) throw ArgumentError("wall thickness must be positive");
  if (clearance < 0) throw ArgumentError("clearance must be non-negative");
}

namespace {

struct Footprint {
  FurnitureKind kind;
  double half_x, half_y, height;
};

Footprint draw_footprint(FurnitureKind kind, Rng& rng) {
  switch (kind) {
    case FurnitureKind::Box:
      return {kind, 0.5 * uniform(rng, 0.4, 0.9), 0.5 * uniform(rng, 0.4, 0.9), uniform(rng, 0.4, 0.9)};
    case FurnitureKind::Prism: {
      const double r = uniform(rng, 0.2, 0.32);
      return {kind, r, r, uniform(rng, 0.5, 1.0)};
    }
    case FurnitureKind::Table:
      return {kind, 0.5 * uniform(rng, 0.8, 1.2), 0.5 * uniform(rng, 0.7, 1.0), uniform(rng, 0.3, 0.75)};
  }
  return {kind, 0.3, 0.3, 0.5};
}

constexpr double kTableTop = 0.05;
constexpr double kLegSize = 0.06;
constexpr double kLegInset = 0.04;
constexpr int kPrismSides = 12;

TriangleMesh furniture_mesh(const FurnitureItem& item) {
  const Aabb& b = item.bounds;
  switch (item.kind) {
    case FurnitureKind::Box:
      return make_box(b.min, b.max);
    case FurnitureKind::Prism: {
      const Vec3 c = b.center();
      return make_prism(Vec3(c.x(), c.y(), 0.0), 0.5 * b.extent().x(), b.extent().z(), kPrismSides);
    }
    case FurnitureKind::Table: {
      const double top = b.max.z();
      TriangleMesh m = make_box(Vec3(b.min.x(), b.min.y(), top - kTableTop), b.max);
      for (int k = 0; k < 4; ++k) {
        const double x = (k & 1) ? b.max.x() - kLegInset - kLegSize : b.min.x() + kLegInset;
        const double y = (k & 2) ? b.max.y() - kLegInset - kLegSize : b.min.y() + kLegInset;
        m.append(make_box(Vec3(x, y, 0.0), Vec3(x + kLegSize, y + kLegSize, top - kTableTop)));
      }
      return m;
    }
  }
  return {};
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  scene.layout = make_box_shell(Vec3::Zero(), Vec3(spec.size_x, spec.size_y, spec.height), spec.wall_thickness);
  scene.complete = scene.layout;

  Rng rng(derive_seed(spec.seed, 0x5ce7e));
  const std::size_t start = spec.kinds.empty() ? 0 : uniform_index(rng, spec.kinds.size());
  for (int i = 0; i < spec.furniture_count; ++i) {
    const FurnitureKind kind = spec.kinds[(start + i) % spec.kinds.size()];
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const Footprint f = draw_footprint(kind, rng);
      const double lo_x = spec.clearance + f.half_x, hi_x = spec.size_x - spec.clearance - f.half_x;
      const double lo_y = spec.clearance + f.half_y, hi_y = spec.size_y - spec.clearance - f.half_y;
      if (lo_x >= hi_x || lo_y >= hi_y || f.height >= spec.height - spec.clearance) continue;
      const double cx = uniform(rng, lo_x, hi_x), cy = uniform(rng, lo_y, hi_y);
      FurnitureItem item{kind, Aabb(Vec3(cx - f.half_x, cy - f.half_y, 0.0), Vec3(cx + f.half_x, cy + f.half_y, f.height))};
      bool clear = true;
      for (const auto& other : scene.furniture) {
        if (Aabb::separation(item.bounds, other.bounds) < spec.clearance) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      scene.furniture.push_back(item);
      scene.complete.append(furniture_mesh(item));
      placed = true;
    }
    if (!placed) {
      throw DataError("could not place furniture item " + std::to_string(i) + " (" + to_string(kind) +
                      ") after 100 attempts; try fewer furniture items or a larger room");
    }
  }
  return scene;
}

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

std::vector<Pose> sample_trajectory(const Trajectory& traj, const Bvh* scene, double clearance) {
  const std::size_t n = traj.positions.size();
  if (n < 4) throw ArgumentError("a trajectory needs at least 4 control points");
  if (traj.targets.size() != n) throw ArgumentError("one look-at target is required per control point");
  if (traj.samples_per_segment < 1) throw ArgumentError("samples_per_segment must be >= 1");
  const std::size_t segments = traj.closed ? n : n - 3;
  auto at = [&](const std::vector<Vec3>& pts, long i) {
    const long m = static_cast<long>(n);
    return pts[static_cast<std::size_t>(((i % m) + m) % m)];
  };
  std::vector<Pose> poses;
  poses.reserve(segments * traj.samples_per_segment);
  for (std::size_t s = 0; s < segments; ++s) {
    // Segment s runs from control point i to i + 1.
    const long i = traj.closed ? static_cast<long>(s) : static_cast<long>(s) + 1;
    for (int k = 0; k < traj.samples_per_segment; ++k) {
      const double t = (k + 0.5) / traj.samples_per_segment;
      const Vec3 pos = catmull_rom(at(traj.positions, i - 1), at(traj.positions, i), at(traj.positions, i + 1),
                                   at(traj.positions, i + 2), t);
      const Vec3 target = catmull_rom(at(traj.targets, i - 1), at(traj.targets, i), at(traj.targets, i + 1),
                                      at(traj.targets, i + 2), t);
      if (scene) {
        const double d = scene->signed_distance(pos);
        if (d < clearance) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "camera at (%.3f, %.3f, %.3f) on segment %zu is %.3f m from geometry (need %.3f)",
                        pos.x(), pos.y(), pos.z(), s, d, clearance);
          throw DataError(buf);
        }
      }
      poses.push_back(Pose::look_at(pos, target));
    }
  }
  return poses;
}

Trajectory default_trajectory(const Scene& scene, int frames, double camera_height, double orbit_fraction,
                              double look_height) {
  constexpr int kControl = 8;
  Trajectory traj;
  traj.closed = true;
  traj.samples_per_segment = std::max(1, (frames + kControl - 1) / kControl);
  const Vec3 c = scene.interior().center();
  const double rx = orbit_fraction * 0.5 * scene.spec.size_x;
  const double ry = orbit_fraction * 0.5 * scene.spec.size_y;
  for (int k = 0; k < kControl; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kControl;
    const Vec3 radial(std::cos(a), std::sin(a), 0.0);
    const double h = camera_height + 0.08 * std::sin(3.0 * a);
    traj.positions.emplace_back(c.x() + rx * radial.x(), c.y() + ry * radial.y(), h);
    // Look across the room toward the far floor, swaying sideways so the
    // loop sweeps the walls as well.
    const Vec3 side(-radial.y(), radial.x(), 0.0);
    const Vec3 target = Vec3(c.x(), c.y(), look_height) - Vec3(rx * radial.x(), ry * radial.y(), 0.0) * 1.2 +
                        0.35 * std::sin(2.0 * a) * side;
    traj.targets.push_back(target);
  }
  return traj;
}

void save_scene_info(const Scene& scene, const std::string& role, const std::filesystem::path& path) {
  std::ostringstream os;
  char buf[256];
  os << "[scene]\nrole = " << role << "\nseed = " << scene.spec.seed << "\n";
  std::snprintf(buf, sizeof buf, "size_x = %.17g\nsize_y = %.17g\nheight = %.17g\nwall_thickness = %.17g\n",
                scene.spec.size_x, scene.spec.size_y, scene.spec.height, scene.spec.wall_thickness);
  os << buf << "furniture_count = " << scene.furniture.size() << "\n";
  for (std::size_t i = 0; i < scene.furniture.size(); ++i) {
    const auto& f = scene.furniture[i];
    std::snprintf(buf, sizeof buf,
                  "\n[furniture_%zu]\nkind = %s\nmin = %.17g %.17g %.17g\nmax = %.17g %.17g %.17g\n", i,
                  to_string(f.kind).c_str(), f.bounds.min.x(), f.bounds.min.y(), f.bounds.min.z(), f.bounds.max.x(),
                  f.bounds.max.y(), f.bounds.max.z());
    os << buf;
  }
  write_file_atomic(path, os.str());
}

SceneInfo load_scene_info(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(read_file(path));
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  auto vec = [&](const std::string& text) {
    std::istringstream vs(text);
    Vec3 v;
    if (!(vs >> v.x() >> v.y() >> v.z())) throw ParseError(path.string() + ": malformed vector '" + text + "'");
    return v;
  };
  SceneInfo info;
  try {
    info.role = tree.get<std::string>("scene.role");
    info.spec.seed = tree.get<std::uint64_t>("scene.seed");
    info.spec.size_x = tree.get<double>("scene.size_x");
    info.spec.size_y = tree.get<double>("scene.size_y");
    info.spec.height = tree.get<double>("scene.height");
    info.spec.wall_thickness = tree.get<double>("scene.wall_thickness");
    const int count = tree.get<int>("scene.furniture_count");
    info.spec.furniture_count = count;
    for (int i = 0; i < count; ++i) {
      const std::string sec = "furniture_" + std::to_string(i);
      info.furniture.push_back({furniture_kind_from_string(tree.get<std::string>(sec + ".kind")),
                                Aabb(vec(tree.get<std::string>(sec + ".min")), vec(tree.get<std::string>(sec + ".max")))});
    }
  } catch (const pt::ptree_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return info;
}

}  // namespace occsurf
