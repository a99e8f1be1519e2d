#pragma once

#include <cstddef>
#include <vector>

#include "occsurf/geom.hpp"

namespace occsurf {

// Samples on a regular grid: point (i, j, k) sits at origin + spacing * (i, j, k)
// and is stored at index i + nx * (j + ny * k).
struct ScalarGrid {
  Vec3 origin = Vec3::Zero();
  double spacing = 1.0;
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> values;

  ScalarGrid() = default;
  ScalarGrid(const Vec3& origin_, double spacing_, int nx_, int ny_, int nz_)
      : origin(origin_), spacing(spacing_), nx(nx_), ny(ny_), nz(nz_),
        values(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0) {}

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k);
  }
  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 point(int i, int j, int k) const { return origin + spacing * Vec3(i, j, k); }
  std::size_t size() const { return values.size(); }
};

// Zero level set by Marching Cubes with linear edge interpolation. Values
// exactly equal to the iso level are treated as iso + 1e-9. Vertices are
// shared between cells through their grid edge, and triangles wind
// counter-clockwise seen from the positive side. Returns an empty mesh when
// the grid has no sign change.
TriangleMesh marching_cubes(const ScalarGrid& grid, double iso = 0.0);

}  // namespace occsurf
