#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace occsurf {

// Every tunable of the toolkit. Serialized as an INI-style key=value file
// with sections; unknown keys are rejected on load.
struct RunConfig {
  std::string preset = "desk";

  struct Scene {
    int train_scenes = 4;
    std::uint64_t seed = 2024;
    double room_min = 3.0;  // x/y interior extent range, m
    double room_max = 3.6;
    double height_min = 2.4;
    double height_max = 2.6;
    int furniture_min = 3;
    int furniture_max = 5;
    double wall_thickness = 0.1;
    int frames = 40;
    double camera_height = 1.9;
    // Fraction of the room half-extent used for the camera loop radius.
    double orbit_fraction = 0.45;
    double look_height = 0.35;  // height of the look-at targets, m
  } scene;

  struct Render {
    int width = 160;
    int height = 120;
    double fov_deg = 90.0;
    double max_range = 10.0;
  } render;

  struct Octree {
    int levels = 7;  // L: finest level index
    int split = 3;   // j: last coarse level
    int feature_dim = 12;
    double voxel_size = 0.04;
    double origin = -0.2;  // same value on all three axes
    std::uint64_t init_seed = 11;
  } octree;

  struct Samples {
    double truncation = 0.10;
    double sigma_near = 0.025;
    int n_near = 60000;
    int n_uniform = 60000;
    int per_ray = 2;
    std::uint64_t seed = 13;
  } samples;

  struct Network {
    int pe_bands = 6;
    int geo_hidden = 128;
    int inpainter_hidden = 64;
    double dropout = 0.3;
    double sigma = 0.025;
    double lambda_eik = 0.1;
    double lambda_smooth = 0.005;
    double eps_mag = 0.01;
    double fd_step = 0.01;
  } nn;

  struct Train {
    int epochs = 12;
    int iterations_per_scene = 100;
    int batch_size = 512;
    double inpainter_lr = 1e-3;
    double feature_lr = 1e-3;
    double feature_lr_decay = 0.5;
    std::uint64_t seed = 17;
  } train;

  struct Optimize {
    int iterations = 1000;
    int batch_size = 1024;
    double geo_lr = 1e-2;
    std::uint64_t seed = 19;
  } optimize;

  struct Extract {
    double grid_res = 0.02;
    int alpha = 2;  // 16 cm visibility cell at the 4 cm desk voxel
    double margin = 0.1;
  } extract;

  struct Eval {
    int n_points = 1000000;
    double threshold = 0.025;
    std::uint64_t seed = 23;
  } eval;

  static RunConfig desk() { return {}; }
  // Full-size values (L=9, j=4, 2 cm voxels, 1024x768 at 120 deg, 256-wide
  // inpainter, 4096 batches, 1 cm extraction grid).
  static RunConfig paper();
  static RunConfig from_preset(const std::string& name);

  // Throws ArgumentError on failed invariants.
  void validate() const;
  // Per-level feature learning rate: feature_lr * decay^level.
  double feature_lr_at(int level) const;
  double octree_side() const;
};

RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
std::string format_config(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);
// Writes the resolved config plus the toolkit version.
void save_config(const RunConfig& config, const std::filesystem::path& path);

std::string toolkit_version();

}  // namespace occsurf
