#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "occsurf/bvh.hpp"
#include "occsurf/geom.hpp"

namespace occsurf {

// Pinhole intrinsics. Pixel (u, v) has its centre at image coordinates (u, v).
struct Intrinsics {
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;

  // fx = fy = (width / 2) / tan(fov / 2); principal point at the image centre.
  static Intrinsics from_fov(int width, int height, double fov_deg);
  void validate() const;
  // Camera-frame direction through pixel (u, v), with z component 1.
  Vec3 pixel_ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
};

struct DepthFrame {
  Intrinsics intrinsics;
  Pose pose;                // world-from-camera
  std::vector<float> depth;  // row-major, planar camera-z in meters, 0 = invalid

  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * intrinsics.width + u]; }
  std::size_t valid_count() const;
};

// z-depth of the nearest hit through each pixel centre; misses and hits with
// depth beyond max_range store 0. Deterministic.
DepthFrame render_depth(const Bvh& bvh, const Pose& pose, const Intrinsics& intrinsics, double max_range);

struct ObservedPoint {
  Vec3 point;      // world
  Vec3 view_dir;   // unit, camera centre toward point
};

// One entry per valid pixel, row-major order.
std::vector<ObservedPoint> unproject(const DepthFrame& frame);

// Portable float map, little-endian (negative scale), rows bottom-to-top.
std::string format_pfm(const std::vector<float>& data, int width, int height);
std::vector<float> parse_pfm(const std::string& bytes, int& width, int& height, const std::string& source = "<pfm>");

// A frame on disk: <stem>.pfm raster plus <stem>.cfg intrinsics/pose record.
void save_frame(const DepthFrame& frame, const std::filesystem::path& dir, const std::string& stem);
DepthFrame load_frame(const std::filesystem::path& dir, const std::string& stem);

// frames/manifest.cfg lists frame stems in order.
void save_manifest(const std::filesystem::path& dir, const std::vector<std::string>& stems);
std::vector<std::string> load_manifest(const std::filesystem::path& dir);
// Loads every `stride`-th frame listed in the manifest.
std::vector<DepthFrame> load_frames(const std::filesystem::path& dir, int stride = 1);

}  // namespace occsurf
