#pragma once

#include "occsurf/geom.hpp"

namespace occsurf {

// Closed, outward-oriented solids. All are watertight.
TriangleMesh make_box(const Vec3& min, const Vec3& max);
// Vertical n-gon prism approximating a cylinder.
TriangleMesh make_prism(const Vec3& base_center, double radius, double height, int sides);
// Subdivided icosahedron with vertices projected onto the sphere;
// 20 * 4^subdivisions triangles.
TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions);
// Hollow shell: outer box faces outward, inner box faces inward. The solid is
// the region between the two boxes.
TriangleMesh make_box_shell(const Vec3& inner_min, const Vec3& inner_max, double thickness);
// Single double-sided-free rectangle in the plane z = height (two triangles,
// normal +z). Not watertight; used for ray tests.
TriangleMesh make_quad_z(double x0, double y0, double x1, double y1, double height);

}  // namespace occsurf
