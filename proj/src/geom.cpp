#include "occsurf/geom.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "occsurf/error.hpp"

namespace occsurf {

void check_rotation(const Mat3& rotation, double tol) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = rotation.determinant();
  if (!(ortho <= tol) || !(std::abs(det - 1.0) <= tol)) {
    throw ArgumentError("rotation is not orthonormal with det +1 (orthogonality error " +
                        std::to_string(ortho) + ", det " + std::to_string(det) + ")");
  }
}

Pose Pose::from(const Mat3& rotation, const Vec3& translation) {
  check_rotation(rotation);
  return Pose{rotation, translation};
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 delta = target - eye;
  if (delta.norm() < 1e-12) throw ArgumentError("look-at target coincides with camera position");
  const Vec3 forward = delta.normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) {
    // Looking along the up axis; any perpendicular works.
    right = forward.cross(Vec3::UnitY());
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

double Aabb::separation(const Aabb& a, const Aabb& b) {
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double gap = std::max(b.min[k] - a.max[k], a.min[k] - b.max[k]);
    best = std::max(best, gap);
  }
  return best;
}

double TriangleMesh::area(std::size_t tri) const {
  const Vec3& a = corner(tri, 0);
  return 0.5 * (corner(tri, 1) - a).cross(corner(tri, 2) - a).norm();
}

Vec3 TriangleMesh::face_normal(std::size_t tri) const {
  const Vec3& a = corner(tri, 0);
  const Vec3 n = (corner(tri, 1) - a).cross(corner(tri, 2) - a);
  const double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

double TriangleMesh::total_area() const {
  double sum = 0;
  for (std::size_t i = 0; i < triangles.size(); ++i) sum += area(i);
  return sum;
}

void TriangleMesh::append(const TriangleMesh& other) {
  const auto offset = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  triangles.reserve(triangles.size() + other.triangles.size());
  for (const auto& t : other.triangles) triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
}

void validate_indices(const TriangleMesh& mesh) {
  const auto n = mesh.vertices.size();
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (auto idx : mesh.triangles[i]) {
      if (idx >= n) {
        throw DataError("triangle " + std::to_string(i) + " references vertex " + std::to_string(idx) +
                        " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
  }
}

void validate_non_degenerate(const TriangleMesh& mesh, double min_area) {
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    if (!(mesh.area(i) > min_area)) {
      throw DataError("triangle " + std::to_string(i) + " is degenerate (area " + std::to_string(mesh.area(i)) + ")");
    }
  }
}

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::unordered_map<std::uint64_t, int> edge_counts(const TriangleMesh& mesh) {
  std::unordered_map<std::uint64_t, int> counts;
  counts.reserve(mesh.triangles.size() * 2);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) ++counts[edge_key(t[k], t[(k + 1) % 3])];
  }
  return counts;
}

}  // namespace

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.empty()) return false;
  for (const auto& [key, count] : edge_counts(mesh)) {
    if (count != 2) return false;
  }
  return true;
}

long euler_characteristic(const TriangleMesh& mesh) {
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& t : mesh.triangles)
    for (auto i : t) used[i] = 1;
  const long v = std::count(used.begin(), used.end(), 1);
  const long e = static_cast<long>(edge_counts(mesh).size());
  return v - e + static_cast<long>(mesh.triangles.size());
}

// Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                          const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (det == 0.0) return -1.0;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(qvec) * inv;
}

}  // namespace occsurf
