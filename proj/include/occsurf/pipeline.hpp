#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "occsurf/config.hpp"
#include "occsurf/marching_cubes.hpp"
#include "occsurf/nn/adam.hpp"
#include "occsurf/nn/mlp.hpp"
#include "occsurf/nn/objective.hpp"
#include "occsurf/octree.hpp"
#include "occsurf/samples.hpp"

namespace occsurf {

using Decoder = nn::Mlp<float>;

OctreeLayout octree_layout(const RunConfig& cfg);
nn::MlpArch inpainter_arch(const RunConfig& cfg);
nn::MlpArch geo_arch(const RunConfig& cfg);
nn::DecoderMeta decoder_meta(const RunConfig& cfg, const std::string& role);
nn::ObjectiveConfig objective_config(const RunConfig& cfg);
nn::FieldInput coarse_input(const OctreeFeatureVolume& volume, const RunConfig& cfg);
nn::FieldInput fine_input(const OctreeFeatureVolume& volume, const RunConfig& cfg);

// Samples that retrieve at least one level of [first, last].
std::vector<SdfSample> covered_samples(const std::vector<SdfSample>& samples, const OctreeFeatureVolume& volume,
                                       int first, int last);

struct TrainingScene {
  std::string id;
  OctreeFeatureVolume volume;
  std::vector<SdfSample> bank;  // complete-mesh samples with coarse coverage
};

struct LossRow {
  long step = 0;
  int epoch = 0;
  int visit = 0;  // visit index within the epoch
  std::string scene;
  int iter = 0;  // iteration within the visit
  nn::LossTerms terms;
};

struct TrainCallbacks {
  std::function<void(const LossRow&)> on_step;
  // Called after each scene visit with the index of the visited scene.
  std::function<void(std::size_t scene)> on_visit;
};

// Cross-scene schedule: each epoch visits every scene once in a seeded random
// order and runs iterations_per_scene Adam steps on the inpainter and that
// scene's coarse features. Fine features are left untouched.
long train_inpainter(std::vector<TrainingScene>& scenes, Decoder& inpainter, const RunConfig& cfg,
                     const TrainCallbacks& callbacks = {});

struct OptimizeRow {
  long step = 0;
  nn::LossTerms geo;
  nn::LossTerms inpainter;
};

// Joint per-scene optimization from ray-band samples: the geo objective on
// fine features plus the frozen inpainter objective on coarse features, summed
// with unit weights. Updates `geo` and every level of `volume`.
void optimize_scene(OctreeFeatureVolume& volume, Decoder& geo, const Decoder& inpainter,
                    const std::vector<SdfSample>& band, const RunConfig& cfg, int iterations,
                    const std::function<void(const OptimizeRow&)>& on_step = {});

enum class Route : std::uint8_t { Geo, Inpainter, Free };

// Invisible iff more than alpha of the L+1 levels retrieve no features.
Visibility classify_point(const OctreeFeatureVolume& volume, const Vec3& p, int alpha);

// Batch SDF evaluator: fills out[i] for points[i].
using BatchSdf = std::function<void(std::span<const Vec3> points, std::span<double> out)>;
BatchSdf decoder_sdf(const Decoder& net, const nn::FieldInput& input);

struct GridSpec {
  Vec3 origin;
  double spacing;
  int nx, ny, nz;
};

// Grid covering `box` plus margin, clipped to `limit`, at the given spacing.
GridSpec grid_for(const Aabb& box, double margin, double spacing, const Aabb& limit);
// Union of the cells of all occupied nodes at `level`; empty for an empty volume.
Aabb coverage_bounds(const OctreeFeatureVolume& volume, int level);

struct Extraction {
  TriangleMesh full;
  TriangleMesh geo_only;  // invisible grid points set to free space
  std::size_t geo_points = 0, inpainter_points = 0, free_points = 0;
};

// Routes each grid point by classify_point: visible points to `geo`,
// invisible points to `inpainter`, points without coarse coverage to
// +truncation. Both meshes come from the same decoder evaluations.
Extraction extract_surface(const OctreeFeatureVolume& volume, const GridSpec& grid, const BatchSdf& geo,
                           const BatchSdf& inpainter, int alpha, int split, double truncation);

// loss.csv with "# key=value" metadata lines followed by
// step,epoch,visit,scene,iter,bce,eik,smooth,total.
std::string format_loss_csv(const std::vector<LossRow>& rows, const RunConfig& cfg, const std::vector<std::string>& scenes);

}  // namespace occsurf
