#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occsurf/config.hpp"
#include "occsurf/eval.hpp"
#include "occsurf/geom.hpp"

namespace occsurf {

// Scene directory layout:
//   scene.cfg                   role, room size, furniture
//   poses.cfg                   camera trajectory
//   gt/complete.ply, gt/layout.ply
//   frames/manifest.cfg, frames/frame_NNN.{pfm,cfg}
//   samples/sdf.bin             complete-mesh samples (training scenes)
//   samples/ray_band[_sK].bin   ray-band samples from every K-th frame
//   ckpt/geo_<id>[_sK].bin, ckpt/volume_<id>[_sK].bin, ckpt/optimize_<id>[_sK].csv
//   run.cfg                     resolved configuration of the last stage run here
namespace layout {
std::filesystem::path gt_mesh(const std::filesystem::path& scene);
std::filesystem::path frames(const std::filesystem::path& scene);
std::filesystem::path sdf_bank(const std::filesystem::path& scene);
std::filesystem::path ray_band(const std::filesystem::path& scene, int stride);
std::filesystem::path geo_ckpt(const std::filesystem::path& scene, int stride);
std::filesystem::path volume_ckpt(const std::filesystem::path& scene, int stride);
std::string scene_id(const std::filesystem::path& scene);
}  // namespace layout

void save_poses(const std::vector<Pose>& poses, const std::filesystem::path& path);
std::vector<Pose> load_poses(const std::filesystem::path& path);

// Generates config.scene.train_scenes training rooms (train_NN) and one
// held-out room (test_00) under `out`. Returns the scene directories.
std::vector<std::filesystem::path> run_synth(const RunConfig& cfg, const std::filesystem::path& out);
void run_render(const RunConfig& cfg, const std::filesystem::path& scene);
// Writes the complete-mesh bank for training scenes and the ray-band bank
// from every `stride`-th frame for all scenes.
void run_sample(const RunConfig& cfg, const std::filesystem::path& scene, int stride = 1);
void run_train(const RunConfig& cfg, const std::vector<std::filesystem::path>& scenes, const std::filesystem::path& ckpt);
void run_optimize(const RunConfig& cfg, const std::filesystem::path& scene, const std::filesystem::path& inpainter,
                  int stride = 1);

struct ExtractedMeshes {
  TriangleMesh full;
  TriangleMesh geo_only;
};
// Throws DataError("missing geo checkpoint ...") before optimize has run.
ExtractedMeshes run_extract(const RunConfig& cfg, const std::filesystem::path& scene,
                            const std::filesystem::path& inpainter, int stride = 1);

// Evaluation region for a scene: its room interior grown by 5 cm, which
// leaves out the outer faces of the walls.
Aabb evaluation_crop(const std::filesystem::path& scene);

struct E2eRow {
  std::string variant;
  int frames = 0;
  MetricsReport metrics;
  double regional_completeness = 0;
};

// Full desk-scale experiment under `out`; writes results.csv and returns its rows.
std::vector<E2eRow> run_e2e(const RunConfig& cfg, const std::filesystem::path& out);
std::string format_e2e_csv(const std::vector<E2eRow>& rows);
std::vector<E2eRow> parse_e2e_csv(const std::string& text);

}  // namespace occsurf
