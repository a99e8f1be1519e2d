#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "occsurf/nn/encoding.hpp"
#include "occsurf/nn/loss.hpp"
#include "occsurf/nn/mlp.hpp"
#include "occsurf/octree.hpp"

namespace occsurf::nn {

// Decoder input: positional encoding of the normalized point followed by the
// interpolated features of levels [first, last], level-ascending, zeros for
// absent levels.
struct FieldInput {
  const OctreeFeatureVolume* volume = nullptr;
  int first = 0;
  int last = 0;
  PositionalEncoding encoding;

  int feature_width() const { return (last - first + 1) * volume->layout().feature_dim; }
  int width() const { return encoding.width() + feature_width(); }
  std::uint32_t level_mask() const { return ((1u << (last + 1)) - 1u) & ~((1u << first) - 1u); }

  // Writes one input column; returns the presence bits of levels [first, last].
  // When `samples` is given it receives one entry per level in the range.
  template <typename Col>
  std::uint32_t fill(const Vec3& p, Col&& col, std::optional<LevelSample>* samples = nullptr) const {
    const auto& layout = volume->layout();
    encoding.encode(normalize_point(p, layout.origin, layout.side), col);
    const int F = layout.feature_dim;
    const int base = encoding.width();
    std::uint32_t presence = 0;
    for (int level = first; level <= last; ++level) {
      auto s = volume->locate(level, p);
      auto seg = col.segment(base + (level - first) * F, F);
      if (s) {
        presence |= 1u << level;
        const auto& feats = volume->features(level);
        for (int r = 0; r < F; ++r) {
          double acc = 0.0;
          for (int c = 0; c < 8; ++c) acc += s->weights[c] * feats(r, s->corners[c]);
          seg[r] = static_cast<typename std::decay_t<Col>::Scalar>(acc);
        }
      } else {
        seg.setZero();
      }
      if (samples) samples[level - first] = std::move(s);
    }
    return presence;
  }
};

struct ObjectiveConfig {
  double sigma = 0.025;
  double lambda_eik = 0.1;
  double lambda_smooth = 0.005;
  double fd_step = 0.01;
};

struct ObjectiveSample {
  Vec3 p;
  double d_gt = 0;
  Vec3 eps = Vec3::Zero();  // offset of the smoothness partner point
};

struct LossTerms {
  double bce = 0;     // mean over samples
  double eik = 0;     // mean over samples with a valid gradient at p
  double smooth = 0;  // mean over samples with both gradients valid
  double total = 0;   // mean of bce + lambda_eik eik + lambda_smooth smooth, invalid terms omitted
  int samples = 0;
  int eik_valid = 0;
  int smooth_valid = 0;
};

// Reusable buffers of one objective evaluation.
template <typename T>
struct ObjectiveWorkspace {
  typename Mlp<T>::Matrix X;
  typename Mlp<T>::Cache cache;
  std::vector<std::uint32_t> presence;
  std::vector<std::optional<LevelSample>> located;
};

template <typename T>
struct ObjectiveGradients {
  ObjectiveWorkspace<T> workspace;
  // When false the network is treated as frozen and `net` stays zero.
  bool param_grads = true;
  typename Mlp<T>::Vector net;
  std::vector<Eigen::MatrixXd> features;  // index level - first, shaped like the level's features

  void reset(const Mlp<T>& mlp, const FieldInput& in) {
    net.resize(static_cast<Eigen::Index>(mlp.num_params()));
    net.setZero();
    features.resize(in.last - in.first + 1);
    for (int level = in.first; level <= in.last; ++level) {
      const auto& f = in.volume->features(level);
      auto& g = features[level - in.first];
      g.resize(f.rows(), f.cols());
      g.setZero();
    }
  }
};

// Number of decoder evaluations per sample: the point, six axis probes around
// it, and six probes around its smoothness partner.
inline constexpr int kProbes = 13;

// Probe k of a sample: k = 0 is p; k = 1..6 are p +/- h e_a ordered
// (+x, -x, +y, -y, +z, -z); k = 7..12 repeat that around p + eps.
inline Vec3 probe_point(const ObjectiveSample& s, int k, double h) {
  if (k == 0) return s.p;
  const int j = (k - 1) % 6;
  Vec3 q = k <= 6 ? s.p : Vec3(s.p + s.eps);
  q[j / 2] += (j % 2 == 0) ? h : -h;
  return q;
}

// Central-difference gradient of the decoder at p with step h, features
// re-interpolated at each probe. Empty when a probe sees a different set of
// present levels than p.
template <typename T>
std::optional<Vec3> spatial_gradient(const Mlp<T>& net, const FieldInput& input, const Vec3& p, double h) {
  if (!(h > 0)) throw ArgumentError("finite-difference step must be positive");
  typename Mlp<T>::Matrix X(input.width(), 7);
  const ObjectiveSample s{p, 0.0, Vec3::Zero()};
  std::uint32_t presence[7];
  for (int k = 0; k < 7; ++k) presence[k] = input.fill(probe_point(s, k, h), X.col(k));
  for (int k = 1; k < 7; ++k)
    if (presence[k] != presence[0]) return std::nullopt;
  const auto y = net.forward(X);
  Vec3 g;
  for (int a = 0; a < 3; ++a) g[a] = (static_cast<double>(y[1 + 2 * a]) - static_cast<double>(y[2 + 2 * a])) / (2.0 * h);
  return g;
}

// Evaluates the batch objective with spatial gradients from central
// differences. Batch columns are probe-major (column k * B + s), so a dropout
// mask period of B shares each sample's mask across its probes. A gradient is
// invalid when any of its probes sees a different set of present levels than
// p itself. When `grads` is given it is reset and filled with exact
// derivatives of `total`.
template <typename T>
LossTerms evaluate_objective(const Mlp<T>& net, const FieldInput& input, std::span<const ObjectiveSample> batch,
                             const ObjectiveConfig& cfg, const typename Mlp<T>::DropoutMasks* masks,
                             ObjectiveGradients<T>* grads) {
  using Matrix = typename Mlp<T>::Matrix;
  using RowVector = typename Mlp<T>::RowVector;
  const int B = static_cast<int>(batch.size());
  LossTerms terms;
  terms.samples = B;
  if (B == 0) throw ArgumentError("objective evaluated on an empty batch");
  const int nlev = input.last - input.first + 1;
  const int N = kProbes * B;
  const double h = cfg.fd_step;

  thread_local ObjectiveWorkspace<T> scratch;
  ObjectiveWorkspace<T>& ws = grads ? grads->workspace : scratch;
  Matrix& X = ws.X;
  X.resize(input.width(), N);
  auto& presence = ws.presence;
  presence.resize(N);
  auto& located = ws.located;
  if (grads) located.resize(static_cast<std::size_t>(N) * nlev);
  for (int k = 0; k < kProbes; ++k) {
    for (int s = 0; s < B; ++s) {
      const int c = k * B + s;
      presence[c] = input.fill(probe_point(batch[s], k, h), X.col(c), grads ? &located[static_cast<std::size_t>(c) * nlev] : nullptr);
    }
  }

  const RowVector y = net.forward(X, grads ? &ws.cache : nullptr, masks);

  RowVector dy = RowVector::Zero(N);
  const double inv_b = 1.0 / B;
  const double inv_2h = 1.0 / (2.0 * h);
  double sum_bce = 0, sum_eik = 0, sum_smooth = 0, sum_total = 0;
  for (int s = 0; s < B; ++s) {
    const auto r = bce_with_grad(static_cast<double>(y[s]), batch[s].d_gt, cfg.sigma);
    sum_bce += r.loss;
    sum_total += r.loss;
    dy[s] += static_cast<T>(r.d_pred * inv_b);

    bool valid_p = true, valid_q = true;
    for (int k = 1; k <= 6; ++k) valid_p &= presence[k * B + s] == presence[s];
    for (int k = 7; k <= 12; ++k) valid_q &= presence[k * B + s] == presence[s];
    Vec3 gp, gq;
    for (int a = 0; a < 3; ++a) {
      gp[a] = (static_cast<double>(y[(1 + 2 * a) * B + s]) - static_cast<double>(y[(2 + 2 * a) * B + s])) * inv_2h;
      gq[a] = (static_cast<double>(y[(7 + 2 * a) * B + s]) - static_cast<double>(y[(8 + 2 * a) * B + s])) * inv_2h;
    }
    Vec3 dgp = Vec3::Zero(), dgq = Vec3::Zero();
    if (valid_p) {
      const double eik = loss_eikonal(gp);
      sum_eik += eik;
      ++terms.eik_valid;
      sum_total += cfg.lambda_eik * eik;
      const double n = gp.norm();
      if (n > 0) dgp += cfg.lambda_eik * (-2.0 * (1.0 - n) / n) * gp;
    }
    if (valid_p && valid_q) {
      const double sm = loss_smooth(gp, gq);
      sum_smooth += sm;
      ++terms.smooth_valid;
      sum_total += cfg.lambda_smooth * sm;
      dgp += cfg.lambda_smooth * 2.0 * (gp - gq);
      dgq -= cfg.lambda_smooth * 2.0 * (gp - gq);
    }
    for (int a = 0; a < 3; ++a) {
      dy[(1 + 2 * a) * B + s] += static_cast<T>(dgp[a] * inv_2h * inv_b);
      dy[(2 + 2 * a) * B + s] -= static_cast<T>(dgp[a] * inv_2h * inv_b);
      dy[(7 + 2 * a) * B + s] += static_cast<T>(dgq[a] * inv_2h * inv_b);
      dy[(8 + 2 * a) * B + s] -= static_cast<T>(dgq[a] * inv_2h * inv_b);
    }
  }
  terms.bce = sum_bce * inv_b;
  terms.eik = terms.eik_valid ? sum_eik / terms.eik_valid : 0.0;
  terms.smooth = terms.smooth_valid ? sum_smooth / terms.smooth_valid : 0.0;
  terms.total = sum_total * inv_b;
  if (!std::isfinite(terms.total)) throw NumericalError("non-finite loss");
  if (!grads) return terms;

  grads->reset(net, input);
  const Matrix dx = net.backward(ws.cache, dy, grads->net, masks, grads->param_grads);
  const int F = input.volume->layout().feature_dim;
  const int base = input.encoding.width();
  for (int c = 0; c < N; ++c) {
    for (int li = 0; li < nlev; ++li) {
      const auto& s = located[static_cast<std::size_t>(c) * nlev + li];
      if (!s) continue;
      auto& g = grads->features[li];
      for (int k = 0; k < 8; ++k) {
        const double w = s->weights[k];
        double* dst = g.col(s->corners[k]).data();
        for (int r = 0; r < F; ++r) dst[r] += w * static_cast<double>(dx(base + li * F + r, c));
      }
    }
  }
  return terms;
}

}  // namespace occsurf::nn
