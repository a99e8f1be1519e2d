#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "occsurf/bvh.hpp"
#include "occsurf/geom.hpp"
#include "occsurf/render.hpp"

namespace occsurf {

enum class SampleKind : std::uint8_t { NearSurface = 0, UniformFree = 1, UniformInterior = 2, RayBand = 3 };
enum class Visibility : std::uint8_t { Visible = 0, Invisible = 1 };

struct SdfSample {
  Vec3 p;
  double d_gt = 0;
  SampleKind kind = SampleKind::NearSurface;
  Visibility visibility = Visibility::Invisible;
};

struct MeshSamplingOptions {
  double sigma_near = 0.025;
  // Region for uniform samples; defaults to the mesh bounding box.
  std::optional<Aabb> bounds;
  // Give up balancing after this many uniform candidates per requested sample.
  int max_attempts_per_sample = 200;
};

// Near-surface samples (area-weighted surface points offset along the face
// normal by N(0, sigma_near)) followed by uniform samples in the bounds.
// Uniform samples are drawn until n_uniform / 2 negatives and the remainder
// positives have been collected; surplus candidates of either sign are
// discarded. Throws DataError for a non-watertight mesh or when balancing
// cannot be reached.
std::vector<SdfSample> sample_mesh_sdf(const Bvh& bvh, const TriangleMesh& mesh, int n_near, int n_uniform,
                                       std::uint64_t seed, const MeshSamplingOptions& options = {});

// A sample is visible when some frame sees it: it projects to a valid pixel
// whose stored depth d satisfies 0 < z <= d + truncation for the sample's
// camera-space z. Observed free space in front of a surface is therefore
// visible; anything hidden behind the truncation band is not.
void label_visibility(std::vector<SdfSample>& samples, const std::vector<DepthFrame>& frames, double truncation);
bool is_observed(const Vec3& p, const DepthFrame& frame, double truncation);

// For each valid pixel with ray endpoint at ray length s, draws per_ray ray
// lengths uniformly in [s - truncation, s + truncation]; d_gt = s - length.
std::vector<SdfSample> ray_band_samples(const DepthFrame& frame, int per_ray, double truncation, std::uint64_t seed);

// Bank file: "OSSB", u32 version, u64 count, then per record
// 3 x f32 point, f32 d_gt, u8 kind, u8 visibility.
void save_sample_bank(const std::vector<SdfSample>& samples, const std::filesystem::path& path);
std::vector<SdfSample> load_sample_bank(const std::filesystem::path& path);

}  // namespace occsurf
