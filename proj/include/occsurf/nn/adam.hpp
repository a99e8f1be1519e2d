#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "occsurf/error.hpp"

namespace occsurf::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  Eigen::Array<T, Eigen::Dynamic, 1> m, v;
  long step = 0;

  explicit AdamState(std::size_t n = 0) { reset(n); }
  void reset(std::size_t n) {
    m = Eigen::Array<T, Eigen::Dynamic, 1>::Zero(static_cast<Eigen::Index>(n));
    v = m;
    step = 0;
  }
  std::size_t size() const { return static_cast<std::size_t>(m.size()); }
};

// Bias-corrected Adam on a flat parameter block. Throws NumericalError before
// touching anything when a gradient entry is not finite.
template <typename T>
void adam_step(T* params, const T* grads, std::size_t n, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {}, const char* what = "parameters") {
  if (state.size() != n) throw ArgumentError(std::string("Adam state size mismatch for ") + what);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(grads[i]))) {
      throw NumericalError(std::string("non-finite gradient in ") + what + " at index " + std::to_string(i));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grads[i];
    T& m = state.m[static_cast<Eigen::Index>(i)];
    T& v = state.v[static_cast<Eigen::Index>(i)];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g * g;
    params[i] -= step_size * m / (std::sqrt(v) * inv_sqrt_c2 + eps);
  }
}

template <typename Derived, typename GradDerived>
void adam_step(Eigen::DenseBase<Derived>& params, const Eigen::DenseBase<GradDerived>& grads,
               AdamState<typename Derived::Scalar>& state, double lr, const AdamConfig& cfg = {},
               const char* what = "parameters") {
  static_assert(std::is_same_v<typename Derived::Scalar, typename GradDerived::Scalar>);
  if (params.size() != grads.size()) throw ArgumentError(std::string("gradient shape mismatch for ") + what);
  adam_step(params.derived().data(), grads.derived().data(), static_cast<std::size_t>(params.size()), state, lr,
            cfg, what);
}

}  // namespace occsurf::nn
