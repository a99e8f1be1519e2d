#include "occsurf/samples.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"
#include "occsurf/rng.hpp"

namespace occsurf {

namespace {

constexpr char kBankMagic[5] = "OSSB";
constexpr std::uint32_t kBankVersion = 1;
constexpr std::size_t kRecordBytes = 3 * 4 + 4 + 1 + 1;

}  // namespace

std::vector<SdfSample> sample_mesh_sdf(const Bvh& bvh, const TriangleMesh& mesh, int n_near, int n_uniform,
                                       std::uint64_t seed, const MeshSamplingOptions& options) {
  if (!bvh.watertight()) throw DataError("SDF sampling requires a watertight mesh");
  if (n_near < 0 || n_uniform < 0) throw ArgumentError("sample counts must be non-negative");
  if (!(options.sigma_near > 0)) throw ArgumentError("sigma_near must be positive");
  std::vector<SdfSample> out;
  out.reserve(static_cast<std::size_t>(n_near) + n_uniform);

  if (n_near > 0) {
    Rng rng(derive_seed(seed, 1));
    std::vector<double> cumulative(mesh.num_triangles());
    double total = 0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) cumulative[t] = total += mesh.area(t);
    for (int i = 0; i < n_near; ++i) {
      const double r = uniform(rng, 0.0, total);
      const auto tri = static_cast<std::size_t>(
          std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin(),
                                   static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
      double u = uniform(rng, 0.0, 1.0), v = uniform(rng, 0.0, 1.0);
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      const Vec3 surface = mesh.corner(tri, 0) + u * (mesh.corner(tri, 1) - mesh.corner(tri, 0)) +
                           v * (mesh.corner(tri, 2) - mesh.corner(tri, 0));
      const double offset = normal(rng, 0.0, options.sigma_near);
      SdfSample s;
      s.p = surface + offset * mesh.face_normal(tri);
      s.d_gt = bvh.signed_distance(s.p);
      s.kind = SampleKind::NearSurface;
      out.push_back(s);
    }
  }

  if (n_uniform > 0) {
    const Aabb box = options.bounds.value_or(mesh.bounds());
    Rng rng(derive_seed(seed, 2));
    const int want_neg = n_uniform / 2;
    const int want_pos = n_uniform - want_neg;
    int neg = 0, pos = 0;
    const long long cap = static_cast<long long>(options.max_attempts_per_sample) * n_uniform;
    for (long long attempt = 0; neg < want_neg || pos < want_pos; ++attempt) {
      if (attempt >= cap) {
        throw DataError("uniform SDF sampling could not balance signs after " + std::to_string(cap) +
                        " candidates (" + std::to_string(neg) + " negative, " + std::to_string(pos) + " positive)");
      }
      SdfSample s;
      for (int a = 0; a < 3; ++a) s.p[a] = uniform(rng, box.min[a], box.max[a]);
      s.d_gt = bvh.signed_distance(s.p);
      if (s.d_gt < 0) {
        if (neg >= want_neg) continue;
        ++neg;
        s.kind = SampleKind::UniformInterior;
      } else {
        if (pos >= want_pos) continue;
        ++pos;
        s.kind = SampleKind::UniformFree;
      }
      out.push_back(s);
    }
  }
  return out;
}

bool is_observed(const Vec3& p, const DepthFrame& frame, double truncation) {
  const Intrinsics& k = frame.intrinsics;
  const Vec3 c = frame.pose.rotation.transpose() * (p - frame.pose.translation);
  if (!(c.z() > 0)) return false;
  const double u = k.fx * c.x() / c.z() + k.cx;
  const double v = k.fy * c.y() / c.z() + k.cy;
  const long ui = std::lround(u), vi = std::lround(v);
  if (ui < 0 || vi < 0 || ui >= k.width || vi >= k.height) return false;
  const double d = frame.at(static_cast<int>(ui), static_cast<int>(vi));
  return d > 0 && c.z() <= d + truncation;
}

void label_visibility(std::vector<SdfSample>& samples, const std::vector<DepthFrame>& frames, double truncation) {
  for (auto& s : samples) {
    s.visibility = Visibility::Invisible;
    for (const auto& f : frames) {
      if (is_observed(s.p, f, truncation)) {
        s.visibility = Visibility::Visible;
        break;
      }
    }
  }
}

std::vector<SdfSample> ray_band_samples(const DepthFrame& frame, int per_ray, double truncation, std::uint64_t seed) {
  if (!(truncation > 0)) throw ArgumentError("truncation must be positive");
  if (per_ray < 0) throw ArgumentError("per_ray must be non-negative");
  const Intrinsics& k = frame.intrinsics;
  Rng rng(seed);
  std::vector<SdfSample> out;
  out.reserve(frame.valid_count() * per_ray);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const double d = frame.at(u, v);
      if (!(d > 0)) continue;
      const Vec3 ray = k.pixel_ray(u, v);
      const double len = ray.norm();
      const double s = d * len;
      const Vec3 dir = frame.pose.rotation * (ray / len);
      for (int i = 0; i < per_ray; ++i) {
        const double r = uniform(rng, s - truncation, s + truncation);
        out.push_back({frame.pose.translation + r * dir, s - r, SampleKind::RayBand, Visibility::Visible});
      }
    }
  }
  return out;
}

void save_sample_bank(const std::vector<SdfSample>& samples, const std::filesystem::path& path) {
  std::ostringstream os(std::ios::binary);
  write_magic(os, kBankMagic);
  write_le<std::uint32_t>(os, kBankVersion);
  write_le<std::uint64_t>(os, samples.size());
  for (const auto& s : samples) {
    for (int a = 0; a < 3; ++a) write_le<float>(os, static_cast<float>(s.p[a]));
    write_le<float>(os, static_cast<float>(s.d_gt));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.kind));
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.visibility));
  }
  write_file_atomic(path, os.str());
}

std::vector<SdfSample> load_sample_bank(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream is(bytes, std::ios::binary);
  expect_magic(is, kBankMagic, path.string());
  const auto version = read_le<std::uint32_t>(is, "bank version");
  if (version != kBankVersion) {
    throw ParseError(path.string() + ": unsupported sample bank version " + std::to_string(version));
  }
  const auto count = read_le<std::uint64_t>(is, "sample count");
  if (bytes.size() != 16 + count * kRecordBytes) {
    throw ParseError(path.string() + ": sample bank size " + std::to_string(bytes.size()) + " does not match " +
                     std::to_string(count) + " records");
  }
  std::vector<SdfSample> out(count);
  for (auto& s : out) {
    for (int a = 0; a < 3; ++a) s.p[a] = read_le<float>(is, "sample point");
    s.d_gt = read_le<float>(is, "sample distance");
    const auto kind = read_le<std::uint8_t>(is, "sample kind");
    const auto vis = read_le<std::uint8_t>(is, "sample visibility");
    if (kind > 3 || vis > 1) {
      throw ParseError(path.string() + ": invalid kind/visibility byte in record " +
                       std::to_string(&s - out.data()));
    }
    s.kind = static_cast<SampleKind>(kind);
    s.visibility = static_cast<Visibility>(vis);
  }
  return out;
}

}  // namespace occsurf
