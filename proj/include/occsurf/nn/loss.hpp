#pragma once

#include <algorithm>
#include <cmath>

#include "occsurf/geom.hpp"

namespace occsurf::nn {

// S(x) = 1 / (1 + e^{x / sigma}); maps inside (negative) to ~1 and outside to ~0.
inline double sdf_sigmoid(double x, double sigma) {
  const double z = x / sigma;
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline constexpr double kLogFloor = -27.631021115928547;  // log(1e-12)

struct BceResult {
  double loss;
  double d_pred;  // derivative with respect to the predicted distance
};

// -[S(d_gt) log S(d_p) + (1 - S(d_gt)) log(1 - S(d_p))], logs clamped at log 1e-12.
inline BceResult bce_with_grad(double d_p, double d_gt, double sigma) {
  const double target = sdf_sigmoid(d_gt, sigma);
  const double x = d_p / sigma;
  const double log_s = -softplus(x);       // log S(d_p)
  const double log_1ms = -softplus(-x);    // log(1 - S(d_p))
  const double s_p = sdf_sigmoid(d_p, sigma);
  BceResult r{0.0, 0.0};
  // d log S / dx = -(1 - S); d log(1 - S) / dx = S.
  if (log_s > kLogFloor) {
    r.loss -= target * log_s;
    r.d_pred += target * (1.0 - s_p) / sigma;
  } else {
    r.loss -= target * kLogFloor;
  }
  if (log_1ms > kLogFloor) {
    r.loss -= (1.0 - target) * log_1ms;
    r.d_pred -= (1.0 - target) * s_p / sigma;
  } else {
    r.loss -= (1.0 - target) * kLogFloor;
  }
  return r;
}

inline double loss_bce(double d_p, double d_gt, double sigma) { return bce_with_grad(d_p, d_gt, sigma).loss; }

inline double loss_eikonal(const Vec3& grad) {
  const double r = 1.0 - grad.norm();
  return r * r;
}

inline double loss_smooth(const Vec3& grad_p, const Vec3& grad_q) { return (grad_p - grad_q).squaredNorm(); }

}  // namespace occsurf::nn
