#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "occsurf/bvh.hpp"
#include "occsurf/geom.hpp"
#include "occsurf/kdtree.hpp"
#include "occsurf/scenegen.hpp"

namespace occsurf {

// n area-weighted uniform surface samples.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, int n, std::uint64_t seed);

// Triangles whose centroid lies inside `box`.
TriangleMesh crop_mesh(const TriangleMesh& mesh, const Aabb& box);

struct MetricsOptions {
  int n = 100000;
  double threshold = 0.025;
  std::uint64_t seed = 23;
  // When set, both meshes are restricted to triangles with centroids inside.
  std::optional<Aabb> crop;
};

struct MetricsReport {
  double accuracy = 0;      // % of prediction samples within threshold of ground truth
  double completeness = 0;  // % of ground-truth samples within threshold of prediction
  double f1 = 0;
  double threshold = 0;
  int n = 0;
  std::uint64_t seed = 0;
  double mean_pred_to_gt = 0;
  double mean_gt_to_pred = 0;
};

double f1_score(double accuracy, double completeness);

// Both meshes are sampled with the same seed, so swapping them swaps accuracy
// and completeness exactly. An empty prediction scores 0/0/0.
MetricsReport compute_metrics(const TriangleMesh& pred, const TriangleMesh& gt, const MetricsOptions& options);
MetricsReport metrics_from_samples(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold);

// Ground-truth floor samples that have free space directly above them while
// lying inside a furniture footprint: the floor under tables.
std::vector<Vec3> under_furniture_floor(const std::vector<Vec3>& gt_samples, const std::vector<FurnitureItem>& furniture,
                                        const Bvh& gt_bvh);

// % of `region` samples within threshold of the prediction samples; NaN for
// an empty region.
double regional_completeness(const std::vector<Vec3>& region, const std::vector<Vec3>& pred_samples, double threshold);

std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& scene, const MetricsReport& report);
std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace occsurf
