#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"
#include "occsurf/rng.hpp"

namespace occsurf::nn {

// Dense ReLU network with scalar output. Layer l maps layer_in(l) to
// layer_out(l); the last layer is linear. With a skip layer s, the input of
// layer s is [h, x]: the previous hidden activation followed by the network
// input.
struct MlpArch {
  int input_dim = 0;
  int hidden = 0;
  int layers = 0;
  bool weight_norm = false;
  double dropout = 0.0;
  int skip_layer = -1;

  int layer_in(int l) const {
    if (l == 0) return input_dim;
    return l == skip_layer ? hidden + input_dim : hidden;
  }
  int layer_out(int l) const { return l == layers - 1 ? 1 : hidden; }
  std::size_t num_params() const {
    std::size_t n = 0;
    for (int l = 0; l < layers; ++l) n += static_cast<std::size_t>(layer_out(l)) * (layer_in(l) + 1 + (weight_norm ? 1 : 0));
    return n;
  }
  void validate() const {
    if (input_dim < 1 || hidden < 1 || layers < 2) throw ArgumentError("network needs >= 2 layers and positive widths");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must be in [0, 1)");
    if (skip_layer == 0 || skip_layer >= layers) throw ArgumentError("skip layer must be in [1, layers)");
  }
  bool operator==(const MlpArch&) const = default;
};

template <typename T>
class Mlp {
 public:
  using Scalar = T;
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  struct Offsets {
    std::size_t v, g, b;
  };

  // Intermediates of one forward pass, needed by backward. Buffers are
  // reused across calls, so keeping one cache per batch shape avoids
  // reallocating large matrices every step.
  struct Cache {
    std::vector<Matrix> inputs;   // input of each layer
    std::vector<Matrix> pre;      // pre-activation of each layer
    std::vector<Matrix> weights;  // effective weights
    std::vector<Vector> row_norms;
    std::vector<Matrix> grad_pre;  // backward scratch
    std::vector<Matrix> grad_in;
    bool filled = false;
  };

  // Inverted dropout masks for hidden layers; column c of a batch uses mask
  // column c % period.
  struct DropoutMasks {
    std::vector<Matrix> masks;
    int period = 0;
  };

  Mlp() = default;
  explicit Mlp(const MlpArch& arch) : arch_(arch) {
    arch_.validate();
    theta_ = Vector::Zero(static_cast<Eigen::Index>(arch_.num_params()));
    std::size_t off = 0;
    for (int l = 0; l < arch_.layers; ++l) {
      Offsets o;
      o.v = off;
      off += static_cast<std::size_t>(arch_.layer_out(l)) * arch_.layer_in(l);
      o.g = off;
      if (arch_.weight_norm) off += arch_.layer_out(l);
      o.b = off;
      off += arch_.layer_out(l);
      offsets_.push_back(o);
    }
  }

  // He-normal hidden weights, small output weights, zero biases; weight-norm
  // gains start at the row norms so the effective weights equal v.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (int l = 0; l < arch_.layers; ++l) {
      auto v = weight_v(l);
      const bool last = l == arch_.layers - 1;
      const double stddev = last ? 1e-2 : std::sqrt(2.0 / arch_.layer_in(l));
      for (Eigen::Index c = 0; c < v.cols(); ++c)
        for (Eigen::Index r = 0; r < v.rows(); ++r) v(r, c) = static_cast<T>(normal(rng, 0.0, stddev));
      bias(l).setZero();
      if (arch_.weight_norm) gain(l) = v.rowwise().norm();
    }
  }

  const MlpArch& arch() const { return arch_; }
  Vector& params() { return theta_; }
  const Vector& params() const { return theta_; }
  std::size_t num_params() const { return static_cast<std::size_t>(theta_.size()); }

  Eigen::Map<Matrix> weight_v(int l) {
    return {theta_.data() + offsets_[l].v, arch_.layer_out(l), arch_.layer_in(l)};
  }
  Eigen::Map<const Matrix> weight_v(int l) const {
    return {theta_.data() + offsets_[l].v, arch_.layer_out(l), arch_.layer_in(l)};
  }
  Eigen::Map<Vector> gain(int l) { return {theta_.data() + offsets_[l].g, arch_.layer_out(l)}; }
  Eigen::Map<const Vector> gain(int l) const { return {theta_.data() + offsets_[l].g, arch_.layer_out(l)}; }
  Eigen::Map<Vector> bias(int l) { return {theta_.data() + offsets_[l].b, arch_.layer_out(l)}; }
  Eigen::Map<const Vector> bias(int l) const { return {theta_.data() + offsets_[l].b, arch_.layer_out(l)}; }

  Matrix effective_weight(int l, Vector* norms = nullptr) const {
    auto v = weight_v(l);
    if (!arch_.weight_norm) return v;
    Vector n = v.rowwise().norm();
    Vector scale = gain(l).cwiseQuotient(n);
    if (norms) *norms = n;
    return scale.asDiagonal() * v;
  }

  DropoutMasks sample_dropout(Rng& rng, int period) const {
    DropoutMasks d;
    d.period = period;
    if (arch_.dropout <= 0.0) return d;
    std::bernoulli_distribution keep(1.0 - arch_.dropout);
    const T scale = static_cast<T>(1.0 / (1.0 - arch_.dropout));
    for (int l = 0; l + 1 < arch_.layers; ++l) {
      Matrix m(arch_.layer_out(l), period);
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = keep(rng) ? scale : T(0);
      d.masks.push_back(std::move(m));
    }
    return d;
  }

  // X is input_dim x N; returns the 1 x N output. Dropout applies only when
  // masks are given (training mode).
  RowVector forward(const Matrix& X, Cache* cache = nullptr, const DropoutMasks* masks = nullptr) const {
    if (X.rows() != arch_.input_dim) {
      throw ArgumentError("network input width " + std::to_string(X.rows()) + " does not match expected " +
                          std::to_string(arch_.input_dim));
    }
    const bool dropout = masks && !masks->masks.empty();
    if (dropout && (masks->period < 1 || X.cols() % masks->period != 0)) {
      throw ArgumentError("batch size is not a multiple of the dropout mask period");
    }
    thread_local Cache scratch;
    Cache& cc = cache ? *cache : scratch;
    const auto L = static_cast<std::size_t>(arch_.layers);
    cc.inputs.resize(L);
    cc.pre.resize(L);
    cc.weights.resize(L);
    cc.row_norms.resize(L);
    cc.inputs[0] = X;
    for (int l = 0; l < arch_.layers; ++l) {
      const Matrix& in = cc.inputs[l];
      cc.weights[l] = effective_weight(l, &cc.row_norms[l]);
      Matrix& z = cc.pre[l];
      z.noalias() = cc.weights[l] * in;
      z.colwise() += bias(l);
      if (l == arch_.layers - 1) break;
      Matrix& next = cc.inputs[l + 1];
      if (l + 1 == arch_.skip_layer) {
        next.resize(arch_.hidden + arch_.input_dim, X.cols());
        next.topRows(arch_.hidden) = z.cwiseMax(T(0));
        next.bottomRows(arch_.input_dim) = X;
      } else {
        next = z.cwiseMax(T(0));
      }
      if (dropout) apply_mask(next.topRows(arch_.hidden), masks->masks[l]);
    }
    cc.filled = cache != nullptr;
    return cc.pre.back();
  }

  // Given dL/dy (1 x N), adds parameter gradients into `grad` and returns
  // dL/dX. With param_grads = false only dL/dX is computed (frozen network).
  Matrix backward(Cache& cache, const RowVector& dy, Vector& grad, const DropoutMasks* masks = nullptr,
                  bool param_grads = true) const {
    if (!cache.filled || cache.inputs.size() != static_cast<std::size_t>(arch_.layers)) {
      throw ArgumentError("backward called without forward intermediates");
    }
    if (dy.cols() != cache.inputs[0].cols()) throw ArgumentError("output gradient width does not match the batch");
    if (grad.size() != theta_.size()) grad = Vector::Zero(theta_.size());
    const bool dropout = masks && !masks->masks.empty();
    const auto L = static_cast<std::size_t>(arch_.layers);
    cache.grad_pre.resize(L);
    cache.grad_in.resize(L);
    cache.grad_pre[L - 1] = dy;
    Matrix dW;
    for (int l = arch_.layers - 1; l >= 0; --l) {
      const Matrix& in = cache.inputs[l];
      const Matrix& dz = cache.grad_pre[l];
      if (param_grads) accumulate_param_grads(l, in, dz, cache.row_norms[l], dW, grad);
      Matrix& din = cache.grad_in[l];
      din.noalias() = cache.weights[l].transpose() * dz;
      if (l == 0) break;
      auto dh = din.topRows(arch_.hidden);
      if (dropout) apply_mask(dh, masks->masks[l - 1]);
      cache.grad_pre[l - 1] = (cache.pre[l - 1].array() > T(0)).select(dh.array(), T(0)).matrix();
    }
    Matrix dx = cache.grad_in[0];
    if (arch_.skip_layer > 0) dx += cache.grad_in[arch_.skip_layer].bottomRows(arch_.input_dim);
    return dx;
  }

 private:
  void accumulate_param_grads(int l, const Matrix& in, const Matrix& dz, const Vector& n, Matrix& dW,
                              Vector& grad) const {
    dW.noalias() = dz * in.transpose();
    Eigen::Map<Vector>(grad.data() + offsets_[l].b, arch_.layer_out(l)) += dz.rowwise().sum();
    Eigen::Map<Matrix> dV(grad.data() + offsets_[l].v, arch_.layer_out(l), arch_.layer_in(l));
    if (arch_.weight_norm) {
      auto v = weight_v(l);
      Eigen::Map<Vector> dg(grad.data() + offsets_[l].g, arch_.layer_out(l));
      for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const T gdot = dW.row(r).dot(v.row(r)) / n[r];
        dg[r] += gdot;
        dV.row(r) += (gain(l)[r] / n[r]) * (dW.row(r) - (gdot / n[r]) * v.row(r));
      }
    } else {
      dV += dW;
    }
  }

 public:

  template <typename U>
  Mlp<U> cast() const {
    Mlp<U> out(arch_);
    out.params() = theta_.template cast<U>();
    return out;
  }

 private:
  template <typename Block>
  static void apply_mask(Block&& h, const Matrix& mask) {
    const Eigen::Index period = mask.cols();
    for (Eigen::Index c0 = 0; c0 < h.cols(); c0 += period) h.middleCols(c0, period).array() *= mask.array();
  }

  MlpArch arch_;
  Vector theta_;
  std::vector<Offsets> offsets_;
};

// Decoder checkpoint metadata stored alongside the architecture.
struct DecoderMeta {
  std::string role;  // "geo" or "inpainter"
  int pe_bands = 6;
  int feature_dim = 12;
  int split = 3;
  int levels = 7;
  bool operator==(const DecoderMeta&) const = default;
};

// "OSNN", u32 version, role string, arch (input, hidden, layers, weight norm,
// skip as i32, dropout f64), meta (B, F, j, L as i32), u64 count, f32 params.
template <typename T>
void save_decoder(const Mlp<T>& net, const DecoderMeta& meta, const std::filesystem::path& path) {
  std::ostringstream os(std::ios::binary);
  static constexpr char magic[5] = "OSNN";
  write_magic(os, magic);
  write_le<std::uint32_t>(os, 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(meta.role.size()));
  os.write(meta.role.data(), static_cast<std::streamsize>(meta.role.size()));
  const MlpArch& a = net.arch();
  for (int v : {a.input_dim, a.hidden, a.layers, a.weight_norm ? 1 : 0, a.skip_layer}) write_le<std::int32_t>(os, v);
  write_le<double>(os, a.dropout);
  for (int v : {meta.pe_bands, meta.feature_dim, meta.split, meta.levels}) write_le<std::int32_t>(os, v);
  write_le<std::uint64_t>(os, net.num_params());
  for (Eigen::Index i = 0; i < net.params().size(); ++i) write_le<float>(os, static_cast<float>(net.params()[i]));
  write_file_atomic(path, os.str());
}

template <typename T>
Mlp<T> load_decoder(const std::filesystem::path& path, DecoderMeta* meta_out = nullptr) {
  const std::string bytes = read_file(path);
  std::istringstream is(bytes, std::ios::binary);
  static constexpr char magic[5] = "OSNN";
  expect_magic(is, magic, path.string());
  if (read_le<std::uint32_t>(is, "decoder version") != 1) throw ParseError(path.string() + ": unsupported decoder version");
  DecoderMeta meta;
  const auto role_len = read_le<std::uint32_t>(is, "role length");
  if (role_len > 64) throw ParseError(path.string() + ": implausible role length");
  meta.role.resize(role_len);
  if (!is.read(meta.role.data(), role_len)) throw ParseError(path.string() + ": truncated role");
  MlpArch a;
  a.input_dim = read_le<std::int32_t>(is, "input dim");
  a.hidden = read_le<std::int32_t>(is, "hidden");
  a.layers = read_le<std::int32_t>(is, "layers");
  a.weight_norm = read_le<std::int32_t>(is, "weight norm") != 0;
  a.skip_layer = read_le<std::int32_t>(is, "skip");
  a.dropout = read_le<double>(is, "dropout");
  meta.pe_bands = read_le<std::int32_t>(is, "bands");
  meta.feature_dim = read_le<std::int32_t>(is, "feature dim");
  meta.split = read_le<std::int32_t>(is, "split");
  meta.levels = read_le<std::int32_t>(is, "levels");
  try {
    a.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  Mlp<T> net(a);
  const auto count = read_le<std::uint64_t>(is, "parameter count");
  if (count != net.num_params()) {
    throw ParseError(path.string() + ": parameter count " + std::to_string(count) + " does not match architecture (" +
                     std::to_string(net.num_params()) + ")");
  }
  for (Eigen::Index i = 0; i < net.params().size(); ++i) net.params()[i] = static_cast<T>(read_le<float>(is, "parameter"));
  if (meta_out) *meta_out = meta;
  return net;
}

}  // namespace occsurf::nn
