#include "occsurf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "occsurf/error.hpp"
#include "occsurf/rng.hpp"

namespace occsurf {

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, int n, std::uint64_t seed) {
  if (mesh.empty()) throw DataError("cannot sample an empty mesh");
  if (n < 1) throw ArgumentError("sample count must be >= 1");
  std::vector<double> cumulative(mesh.num_triangles());
  double total = 0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) cumulative[t] = total += mesh.area(t);
  if (!(total > 0)) throw DataError("cannot sample a mesh with zero surface area");
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double r = uniform(rng, 0.0, total);
    const auto tri = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin(),
        static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    double u = uniform(rng, 0.0, 1.0), v = uniform(rng, 0.0, 1.0);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3& a = mesh.corner(tri, 0);
    out.push_back(a + u * (mesh.corner(tri, 1) - a) + v * (mesh.corner(tri, 2) - a));
  }
  return out;
}

TriangleMesh crop_mesh(const TriangleMesh& mesh, const Aabb& box) {
  TriangleMesh out;
  out.vertices = mesh.vertices;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 c = (mesh.corner(t, 0) + mesh.corner(t, 1) + mesh.corner(t, 2)) / 3.0;
    if (box.contains(c)) out.triangles.push_back(mesh.triangles[t]);
  }
  return out;
}

double f1_score(double accuracy, double completeness) {
  const double s = accuracy + completeness;
  return s > 0 ? 2.0 * accuracy * completeness / s : 0.0;
}

namespace {

// Fraction (in %) of `from` within threshold of `to`, plus the mean distance.
std::pair<double, double> coverage(const std::vector<Vec3>& from, const std::vector<Vec3>& to, double threshold) {
  const KdTree tree(to);
  std::size_t hits = 0;
  double sum = 0;
  for (const Vec3& p : from) {
    const double d = tree.nearest(p).distance;
    hits += d <= threshold;
    sum += d;
  }
  return {100.0 * static_cast<double>(hits) / from.size(), sum / from.size()};
}

}  // namespace

MetricsReport metrics_from_samples(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold) {
  if (!(threshold > 0)) throw ArgumentError("threshold must be positive");
  MetricsReport r;
  r.threshold = threshold;
  r.n = static_cast<int>(gt.size());
  if (pred.empty() || gt.empty()) {
    r.mean_pred_to_gt = r.mean_gt_to_pred = std::numeric_limits<double>::infinity();
    return r;
  }
  std::tie(r.accuracy, r.mean_pred_to_gt) = coverage(pred, gt, threshold);
  std::tie(r.completeness, r.mean_gt_to_pred) = coverage(gt, pred, threshold);
  r.f1 = f1_score(r.accuracy, r.completeness);
  return r;
}

MetricsReport compute_metrics(const TriangleMesh& pred_mesh, const TriangleMesh& gt_mesh, const MetricsOptions& options) {
  if (options.n < 1) throw ArgumentError("metric sample count must be >= 1");
  const TriangleMesh pred = options.crop ? crop_mesh(pred_mesh, *options.crop) : pred_mesh;
  const TriangleMesh gt = options.crop ? crop_mesh(gt_mesh, *options.crop) : gt_mesh;
  if (gt.empty()) throw DataError("ground-truth mesh is empty");
  const auto gt_samples = sample_surface(gt, options.n, options.seed);
  std::vector<Vec3> pred_samples;
  if (!pred.empty()) pred_samples = sample_surface(pred, options.n, options.seed);
  MetricsReport r = metrics_from_samples(pred_samples, gt_samples, options.threshold);
  r.n = options.n;
  r.seed = options.seed;
  return r;
}

std::vector<Vec3> under_furniture_floor(const std::vector<Vec3>& gt_samples, const std::vector<FurnitureItem>& furniture,
                                        const Bvh& gt_bvh) {
  constexpr double kFloorTol = 1e-9;
  constexpr double kProbeHeight = 0.01;
  std::vector<Vec3> out;
  for (const Vec3& p : gt_samples) {
    if (std::abs(p.z()) > kFloorTol) continue;
    const bool under = std::any_of(furniture.begin(), furniture.end(), [&](const FurnitureItem& f) {
      return p.x() > f.bounds.min.x() && p.x() < f.bounds.max.x() && p.y() > f.bounds.min.y() && p.y() < f.bounds.max.y();
    });
    if (under && !gt_bvh.inside(p + Vec3(0, 0, kProbeHeight))) out.push_back(p);
  }
  return out;
}

double regional_completeness(const std::vector<Vec3>& region, const std::vector<Vec3>& pred_samples, double threshold) {
  if (region.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (pred_samples.empty()) return 0.0;
  return coverage(region, pred_samples, threshold).first;
}

std::string metrics_csv_header() { return "scene,accuracy,completeness,f1,threshold,n,seed\n"; }

std::string metrics_csv_row(const std::string& scene, const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%d,%llu\n", scene.c_str(), r.accuracy, r.completeness, r.f1,
                r.threshold, r.n, static_cast<unsigned long long>(r.seed));
  return buf;
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %8s %8s %8s\n", "scene", "Accu.", "Comp.", "F1");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-20s %8.2f %8.2f %8.2f\n", name.c_str(), r.accuracy, r.completeness, r.f1);
    out += buf;
  }
  return out;
}

}  // namespace occsurf
