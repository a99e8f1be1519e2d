#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "occsurf/geom.hpp"

namespace occsurf::nn {

// Layout: [x, y, z, then for k = 0..bands-1: sin(2^k pi p) xyz, cos(2^k pi p) xyz].
struct PositionalEncoding {
  int bands = 6;

  int width() const { return 3 + 6 * bands; }

  template <typename Out>
  void encode(const Vec3& q, Out&& out) const {
    using S = typename std::decay_t<Out>::Scalar;
    for (int a = 0; a < 3; ++a) {
      out[a] = static_cast<S>(q[a]);
      // Higher bands by the double-angle identities.
      double s = std::sin(std::numbers::pi * q[a]);
      double c = std::cos(std::numbers::pi * q[a]);
      for (int k = 0; k < bands; ++k) {
        out[3 + 6 * k + a] = static_cast<S>(s);
        out[6 + 6 * k + a] = static_cast<S>(c);
        const double s2 = 2.0 * s * c;
        c = (c - s) * (c + s);
        s = s2;
      }
    }
  }

  Eigen::VectorXd encode(const Vec3& q) const {
    Eigen::VectorXd out(width());
    encode(q, out);
    return out;
  }
};

// Maps the cube [origin, origin + side]^3 to [-1, 1]^3.
inline Vec3 normalize_point(const Vec3& p, const Vec3& origin, double side) {
  return (2.0 / side) * (p - origin) - Vec3::Ones();
}

}  // namespace occsurf::nn
