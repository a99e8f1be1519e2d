#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace occsurf {

// World frame: meters, right-handed, z up.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid world-from-camera transform. Camera axes follow the pinhole
// convention: +z forward, +x right, +y down.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  // Throws ArgumentError unless rotation is orthonormal with det +1 (to 1e-6).
  static Pose from(const Mat3& rotation, const Vec3& translation);
  // Camera at eye looking at target. Throws ArgumentError when eye == target.
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 forward() const { return rotation.col(2); }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
};

void check_rotation(const Mat3& rotation, double tol = 1e-6);

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi) : min(lo), max(hi) {}

  bool empty() const { return (min.array() > max.array()).any(); }
  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  Aabb padded(double pad) const { return {min.array() - pad, max.array() + pad}; }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool contains(const Aabb& b) const { return contains(b.min) && contains(b.max); }
  // Squared distance from p to the box (0 inside).
  double squared_distance(const Vec3& p) const {
    const Vec3 d = (min - p).cwiseMax(Vec3::Zero()).cwiseMax(p - max);
    return d.squaredNorm();
  }
  // Signed separation along the axis of least overlap; negative means the
  // boxes interpenetrate by that amount.
  static double separation(const Aabb& a, const Aabb& b);
};

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  std::size_t num_triangles() const { return triangles.size(); }
  const Vec3& corner(std::size_t tri, int k) const { return vertices[triangles[tri][k]]; }
  double area(std::size_t tri) const;
  Vec3 face_normal(std::size_t tri) const;  // unit; zero for degenerate faces
  Aabb bounds() const;
  double total_area() const;
  // Appends `other`, offsetting its indices.
  void append(const TriangleMesh& other);
};

// Throws DataError naming the first offending triangle.
void validate_indices(const TriangleMesh& mesh);
void validate_non_degenerate(const TriangleMesh& mesh, double min_area = 1e-12);
// Every undirected edge is shared by exactly two triangles.
bool is_watertight(const TriangleMesh& mesh);
// V - E + F for the (assumed closed) mesh.
long euler_characteristic(const TriangleMesh& mesh);

// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Moller-Trumbore with inclusive barycentric bounds. Returns t or a negative
// value on miss.
double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                          const Vec3& c);

}  // namespace occsurf
