#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "occsurf/config.hpp"
#include "occsurf/geom.hpp"
#include "occsurf/nn/objective.hpp"
#include "occsurf/octree.hpp"
#include "occsurf/pipeline.hpp"
#include "occsurf/rng.hpp"

namespace occsurf::support {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("occsurf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double sphere_sdf(const Vec3& p, const Vec3& center, double radius) { return (p - center).norm() - radius; }

inline BatchSdf sphere_stub(const Vec3& center, double radius) {
  return [center, radius](std::span<const Vec3> points, std::span<double> out) {
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = sphere_sdf(points[i], center, radius);
  };
}

// Six times the enclosed volume; positive for outward winding.
inline double signed_volume6(const TriangleMesh& mesh) {
  double v = 0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    v += mesh.corner(t, 0).dot(mesh.corner(t, 1).cross(mesh.corner(t, 2)));
  return v;
}

inline std::vector<Vec3> sphere_points(const Vec3& center, double radius, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec3 d(normal(rng, 0, 1), normal(rng, 0, 1), normal(rng, 0, 1));
    pts.push_back(center + radius * d.normalized());
  }
  return pts;
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// Objective gradient check against central differences in double precision.
struct GradCheckResult {
  double max_rel_error = 0;
  int params_checked = 0;
  int features_checked = 0;
  int untouched_nonzero = 0;  // untouched corner features with a nonzero gradient
  int skipped = 0;            // coordinates where the loss is not smooth at the FD scale
  double worst_analytic = 0, worst_numeric = 0;

  void record(double analytic, double numeric) {
    const double e = relative_error(analytic, numeric);
    if (e > max_rel_error) {
      max_rel_error = e;
      worst_analytic = analytic;
      worst_numeric = numeric;
    }
  }
};

// Fourth-order central difference of f with respect to x, restoring x.
template <typename F>
double central_difference(double& x, F&& f, double delta = 1e-5) {
  const double saved = x;
  double v[4];
  const double offsets[4] = {2 * delta, delta, -delta, -2 * delta};
  for (int i = 0; i < 4; ++i) {
    x = saved + offsets[i];
    v[i] = f();
  }
  x = saved;
  return (8.0 * (v[1] - v[2]) - (v[0] - v[3])) / (12.0 * delta);
}

// FD derivative, or nothing when the stencils at delta and delta / 2 disagree:
// a ReLU kink lies within the stencil.
template <typename F>
std::optional<double> smooth_derivative(double& x, F&& f) {
  const double a = central_difference(x, f, 1e-5), b = central_difference(x, f, 5e-6);
  if (relative_error(a, b) > 3e-5) return std::nullopt;
  return b;
}

// A patch of surface points in the upper half of a desk-scale volume.
inline OctreeFeatureVolume gradcheck_volume(const RunConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 1));
  std::vector<Vec3> pts;
  for (int i = 0; i < 3000; ++i) {
    const double x = uniform(rng, 0.6, 1.4), y = uniform(rng, 0.6, 1.4);
    pts.emplace_back(x, y, 0.8 + 0.1 * std::sin(3 * x) * std::cos(2 * y));
  }
  auto volume = OctreeFeatureVolume::build(pts, octree_layout(cfg), seed);
  Rng frng(derive_seed(seed, 2));
  for (int level = 0; level <= cfg.octree.levels; ++level) {
    auto& f = volume.features(level);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = uniform(frng, -0.5, 0.5);
  }
  return volume;
}

inline std::vector<nn::ObjectiveSample> gradcheck_batch(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 3));
  std::vector<nn::ObjectiveSample> batch;
  for (int i = 0; i < n; ++i) {
    const double x = uniform(rng, 0.7, 1.3), y = uniform(rng, 0.7, 1.3);
    const double off = normal(rng, 0, 0.03);
    Vec3 eps(normal(rng, 0, 1), normal(rng, 0, 1), normal(rng, 0, 1));
    batch.push_back({Vec3(x, y, 0.8 + 0.1 * std::sin(3 * x) * std::cos(2 * y) + off), off, 0.01 * eps.normalized()});
  }
  return batch;
}

// Checks n_params random decoder parameters, n_features random touched corner
// features and n_features random untouched ones. The inpainter runs in
// training mode with a seeded dropout mask shared by the FD evaluations.
inline GradCheckResult check_objective_gradients(bool inpainter, std::uint64_t seed, int n_params = 200,
                                                 int n_features = 200, int batch_size = 10) {
  RunConfig cfg = RunConfig::desk();
  auto volume = gradcheck_volume(cfg, seed);
  const nn::FieldInput input = inpainter ? coarse_input(volume, cfg) : fine_input(volume, cfg);
  nn::Mlp<double> net(inpainter ? inpainter_arch(cfg) : geo_arch(cfg));
  net.init(derive_seed(seed, 4));
  Rng prng(derive_seed(seed, 5));
  for (Eigen::Index i = 0; i < net.params().size(); ++i) net.params()[i] *= uniform(prng, 0.5, 1.5);
  const auto batch = gradcheck_batch(batch_size, seed);
  const auto ocfg = objective_config(cfg);
  Rng mrng(derive_seed(seed, 6));
  const auto masks = net.sample_dropout(mrng, batch_size);
  const auto* mp = inpainter ? &masks : nullptr;

  nn::ObjectiveGradients<double> grads;
  nn::evaluate_objective(net, input, std::span(batch), ocfg, mp, &grads);
  auto loss = [&] { return nn::evaluate_objective<double>(net, input, std::span(batch), ocfg, mp, nullptr).total; };

  GradCheckResult r;
  Rng pick(derive_seed(seed, 7));
  while (r.params_checked < n_params && r.skipped < n_params) {
    const auto k = static_cast<Eigen::Index>(uniform_index(pick, net.num_params()));
    const auto fd = smooth_derivative(net.params()[k], loss);
    if (!fd) {
      ++r.skipped;
      continue;
    }
    r.record(grads.net[k], *fd);
    ++r.params_checked;
  }
  for (int li = 0; li < static_cast<int>(grads.features.size()); ++li) {
    const int level = input.first + li;
    auto& f = volume.features(level);
    const auto& g = grads.features[li];
    std::vector<Eigen::Index> touched, untouched;
    for (Eigen::Index c = 0; c < g.cols(); ++c) (g.col(c).any() ? touched : untouched).push_back(c);
    const int per_level = std::max(1, n_features / static_cast<int>(grads.features.size()));
    for (int i = 0; i < per_level && !touched.empty() && r.skipped < n_params; ++i) {
      const Eigen::Index c = touched[uniform_index(pick, touched.size())];
      const auto row = static_cast<Eigen::Index>(uniform_index(pick, static_cast<std::size_t>(f.rows())));
      const auto fd = smooth_derivative(f(row, c), loss);
      if (!fd) {
        ++r.skipped;
        --i;
        continue;
      }
      r.record(g(row, c), *fd);
      ++r.features_checked;
    }
    for (int i = 0; i < std::min<int>(4, static_cast<int>(untouched.size())); ++i) {
      const Eigen::Index c = untouched[uniform_index(pick, untouched.size())];
      if (central_difference(f(0, c), loss) != 0.0) ++r.untouched_nonzero;
    }
  }
  return r;
}

}  // namespace occsurf::support
