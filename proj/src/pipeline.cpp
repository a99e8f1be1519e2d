#include "occsurf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "occsurf/error.hpp"
#include "occsurf/rng.hpp"

namespace occsurf {

namespace {

constexpr std::uint64_t kTagSchedule = 0x5343;
constexpr std::uint64_t kTagTrainStep = 0x5453;
constexpr std::uint64_t kTagOptStep = 0x4f53;

Vec3 isotropic_offset(Rng& rng, double magnitude) {
  Vec3 d;
  do {
    d = Vec3(normal(rng, 0, 1), normal(rng, 0, 1), normal(rng, 0, 1));
  } while (d.squaredNorm() < 1e-12);
  return magnitude * d.normalized();
}

std::vector<nn::ObjectiveSample> draw_batch(const std::vector<SdfSample>& pool, int batch_size, double eps_mag, Rng& rng) {
  std::vector<nn::ObjectiveSample> batch(batch_size);
  for (auto& s : batch) {
    const SdfSample& src = pool[uniform_index(rng, pool.size())];
    s.p = src.p;
    s.d_gt = src.d_gt;
    s.eps = isotropic_offset(rng, eps_mag);
  }
  return batch;
}

void step_features(OctreeFeatureVolume& volume, const nn::ObjectiveGradients<float>& grads, int first,
                   std::vector<nn::AdamState<double>>& states, const RunConfig& cfg) {
  for (std::size_t i = 0; i < grads.features.size(); ++i) {
    const int level = first + static_cast<int>(i);
    auto& f = volume.features(level);
    nn::adam_step(f, grads.features[i], states[level], cfg.feature_lr_at(level), {}, "octree features");
  }
}

std::vector<nn::AdamState<double>> feature_states(const OctreeFeatureVolume& volume) {
  std::vector<nn::AdamState<double>> states;
  for (int level = 0; level < volume.layout().num_levels(); ++level) {
    states.emplace_back(static_cast<std::size_t>(volume.features(level).size()));
  }
  return states;
}

}  // namespace

OctreeLayout octree_layout(const RunConfig& cfg) {
  OctreeLayout l;
  l.origin = Vec3::Constant(cfg.octree.origin);
  l.side = cfg.octree_side();
  l.levels = cfg.octree.levels;
  l.split = cfg.octree.split;
  l.feature_dim = cfg.octree.feature_dim;
  return l;
}

nn::MlpArch inpainter_arch(const RunConfig& cfg) {
  nn::MlpArch a;
  a.input_dim = 3 + 6 * cfg.nn.pe_bands + (cfg.octree.split + 1) * cfg.octree.feature_dim;
  a.hidden = cfg.nn.inpainter_hidden;
  a.layers = 8;
  a.weight_norm = true;
  a.dropout = cfg.nn.dropout;
  a.skip_layer = 4;
  return a;
}

nn::MlpArch geo_arch(const RunConfig& cfg) {
  nn::MlpArch a;
  a.input_dim = 3 + 6 * cfg.nn.pe_bands + (cfg.octree.levels - cfg.octree.split) * cfg.octree.feature_dim;
  a.hidden = cfg.nn.geo_hidden;
  a.layers = 4;
  return a;
}

nn::DecoderMeta decoder_meta(const RunConfig& cfg, const std::string& role) {
  return {role, cfg.nn.pe_bands, cfg.octree.feature_dim, cfg.octree.split, cfg.octree.levels};
}

nn::ObjectiveConfig objective_config(const RunConfig& cfg) {
  return {cfg.nn.sigma, cfg.nn.lambda_eik, cfg.nn.lambda_smooth, cfg.nn.fd_step};
}

nn::FieldInput coarse_input(const OctreeFeatureVolume& volume, const RunConfig& cfg) {
  return {&volume, 0, volume.layout().split, {cfg.nn.pe_bands}};
}

nn::FieldInput fine_input(const OctreeFeatureVolume& volume, const RunConfig& cfg) {
  return {&volume, volume.layout().split + 1, volume.layout().levels, {cfg.nn.pe_bands}};
}

std::vector<SdfSample> covered_samples(const std::vector<SdfSample>& samples, const OctreeFeatureVolume& volume,
                                       int first, int last) {
  std::vector<SdfSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    for (int level = first; level <= last; ++level) {
      if (volume.locate(level, s.p)) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

long train_inpainter(std::vector<TrainingScene>& scenes, Decoder& inpainter, const RunConfig& cfg,
                     const TrainCallbacks& callbacks) {
  if (cfg.train.epochs > 0 && scenes.empty()) throw DataError("no training scenes");
  for (const auto& s : scenes) {
    if (s.bank.empty()) throw DataError("training scene " + s.id + " has no covered SDF samples");
  }
  const auto ocfg = objective_config(cfg);
  nn::AdamState<float> net_state(inpainter.num_params());
  std::vector<std::vector<nn::AdamState<double>>> scene_states;
  for (const auto& s : scenes) scene_states.push_back(feature_states(s.volume));
  Rng schedule(derive_seed(cfg.train.seed, kTagSchedule));
  nn::ObjectiveGradients<float> grads;
  long step = 0;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), schedule);
    for (std::size_t visit = 0; visit < order.size(); ++visit) {
      TrainingScene& scene = scenes[order[visit]];
      const auto input = coarse_input(scene.volume, cfg);
      for (int iter = 0; iter < cfg.train.iterations_per_scene; ++iter, ++step) {
        Rng rng(derive_seed(cfg.train.seed, kTagTrainStep, static_cast<std::uint64_t>(step)));
        const auto batch = draw_batch(scene.bank, cfg.train.batch_size, cfg.nn.eps_mag, rng);
        const auto masks = inpainter.sample_dropout(rng, cfg.train.batch_size);
        LossRow row{step, epoch, static_cast<int>(visit), scene.id, iter, {}};
        row.terms = nn::evaluate_objective<float>(inpainter, input, batch, ocfg, &masks, &grads);
        nn::adam_step(inpainter.params(), grads.net, net_state, cfg.train.inpainter_lr, {}, "inpainter");
        step_features(scene.volume, grads, 0, scene_states[order[visit]], cfg);
        if (callbacks.on_step) callbacks.on_step(row);
      }
      if (callbacks.on_visit) callbacks.on_visit(order[visit]);
    }
  }
  return step;
}

void optimize_scene(OctreeFeatureVolume& volume, Decoder& geo, const Decoder& inpainter,
                    const std::vector<SdfSample>& band, const RunConfig& cfg, int iterations,
                    const std::function<void(const OptimizeRow&)>& on_step) {
  if (iterations <= 0) return;
  if (band.empty()) throw DataError("no ray-band samples to optimize against");
  const auto ocfg = objective_config(cfg);
  const auto geo_in = fine_input(volume, cfg);
  const auto ip_in = coarse_input(volume, cfg);
  nn::AdamState<float> geo_state(geo.num_params());
  auto states = feature_states(volume);
  nn::ObjectiveGradients<float> g_geo, g_ip;
  g_ip.param_grads = false;
  for (long step = 0; step < iterations; ++step) {
    Rng rng(derive_seed(cfg.optimize.seed, kTagOptStep, static_cast<std::uint64_t>(step)));
    const auto batch = draw_batch(band, cfg.optimize.batch_size, cfg.nn.eps_mag, rng);
    OptimizeRow row{step, {}, {}};
    row.geo = nn::evaluate_objective<float>(geo, geo_in, batch, ocfg, nullptr, &g_geo);
    row.inpainter = nn::evaluate_objective<float>(inpainter, ip_in, batch, ocfg, nullptr, &g_ip);
    nn::adam_step(geo.params(), g_geo.net, geo_state, cfg.optimize.geo_lr, {}, "geo decoder");
    step_features(volume, g_geo, geo_in.first, states, cfg);
    step_features(volume, g_ip, ip_in.first, states, cfg);
    if (on_step) on_step(row);
  }
}

Visibility classify_point(const OctreeFeatureVolume& volume, const Vec3& p, int alpha) {
  if (alpha < 0) throw ArgumentError("alpha must be >= 0");
  return volume.lookup(p).missing_layers > alpha ? Visibility::Invisible : Visibility::Visible;
}

BatchSdf decoder_sdf(const Decoder& net, const nn::FieldInput& input) {
  return [&net, input](std::span<const Vec3> points, std::span<double> out) {
    constexpr std::size_t kChunk = 8192;
    Decoder::Matrix X;
    for (std::size_t begin = 0; begin < points.size(); begin += kChunk) {
      const std::size_t n = std::min(kChunk, points.size() - begin);
      X.resize(input.width(), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) input.fill(points[begin + i], X.col(static_cast<Eigen::Index>(i)));
      const auto y = net.forward(X);
      for (std::size_t i = 0; i < n; ++i) out[begin + i] = static_cast<double>(y[static_cast<Eigen::Index>(i)]);
    }
  };
}

GridSpec grid_for(const Aabb& box, double margin, double spacing, const Aabb& limit) {
  if (!(spacing > 0)) throw ArgumentError("grid resolution must be positive");
  if (box.empty()) throw DataError("cannot place an extraction grid around an empty region");
  const Aabb padded = box.padded(margin);
  const Vec3 lo = padded.min.cwiseMax(limit.min);
  const Vec3 hi = padded.max.cwiseMin(limit.max);
  GridSpec g;
  g.origin = lo;
  g.spacing = spacing;
  int* dims[3] = {&g.nx, &g.ny, &g.nz};
  for (int a = 0; a < 3; ++a) *dims[a] = std::max(2, static_cast<int>(std::floor((hi[a] - lo[a]) / spacing)) + 1);
  return g;
}

Aabb coverage_bounds(const OctreeFeatureVolume& volume, int level) {
  const auto& layout = volume.layout();
  const double cell = layout.cell_size(level);
  Aabb box;
  for (const auto& k : volume.node_keys(level)) {
    const Vec3 lo = layout.origin + cell * Vec3(k[0], k[1], k[2]);
    box.extend(lo);
    box.extend(lo + Vec3::Constant(cell));
  }
  return box;
}

Extraction extract_surface(const OctreeFeatureVolume& volume, const GridSpec& spec, const BatchSdf& geo,
                           const BatchSdf& inpainter, int alpha, int split, double truncation) {
  if (alpha < 0) throw ArgumentError("alpha must be >= 0");
  ScalarGrid full(spec.origin, spec.spacing, spec.nx, spec.ny, spec.nz);
  ScalarGrid geo_only = full;
  Extraction ex;
  const std::uint32_t coarse_mask = (1u << (split + 1)) - 1u;
  constexpr std::size_t kChunk = 1 << 16;
  std::vector<Vec3> geo_pts, ip_pts;
  std::vector<std::size_t> geo_idx, ip_idx;
  std::vector<double> values;
  auto flush = [&] {
    values.resize(geo_pts.size());
    if (!geo_pts.empty()) geo(geo_pts, values);
    for (std::size_t i = 0; i < geo_pts.size(); ++i) full.values[geo_idx[i]] = geo_only.values[geo_idx[i]] = values[i];
    values.resize(ip_pts.size());
    if (!ip_pts.empty()) inpainter(ip_pts, values);
    for (std::size_t i = 0; i < ip_pts.size(); ++i) full.values[ip_idx[i]] = values[i];
    geo_pts.clear();
    ip_pts.clear();
    geo_idx.clear();
    ip_idx.clear();
  };
  for (int k = 0; k < spec.nz; ++k) {
    for (int j = 0; j < spec.ny; ++j) {
      for (int i = 0; i < spec.nx; ++i) {
        const std::size_t idx = full.index(i, j, k);
        const Vec3 p = full.point(i, j, k);
        const PointLookup lk = volume.lookup(p);
        geo_only.values[idx] = truncation;
        if ((lk.presence & coarse_mask) == 0) {
          full.values[idx] = truncation;
          ++ex.free_points;
        } else if (lk.missing_layers > alpha) {
          ip_pts.push_back(p);
          ip_idx.push_back(idx);
          ++ex.inpainter_points;
        } else {
          geo_pts.push_back(p);
          geo_idx.push_back(idx);
          ++ex.geo_points;
        }
        if (geo_pts.size() + ip_pts.size() >= kChunk) flush();
      }
    }
  }
  flush();
  ex.full = marching_cubes(full);
  ex.geo_only = marching_cubes(geo_only);
  return ex;
}

std::string format_loss_csv(const std::vector<LossRow>& rows, const RunConfig& cfg, const std::vector<std::string>& scenes) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "# epochs=%d\n# iterations_per_scene=%d\n# batch_size=%d\n# inpainter_lr=%.10g\n",
                cfg.train.epochs, cfg.train.iterations_per_scene, cfg.train.batch_size, cfg.train.inpainter_lr);
  out += buf;
  for (int level = 0; level <= cfg.octree.split; ++level) {
    std::snprintf(buf, sizeof buf, "# feature_lr_level_%d=%.10g\n", level, cfg.feature_lr_at(level));
    out += buf;
  }
  std::string joined;
  for (const auto& s : scenes) joined += (joined.empty() ? "" : ";") + s;
  out += "# scenes=" + joined + "\n";
  out += "step,epoch,visit,scene,iter,bce,eik,smooth,total\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%d,%d,%s,%d,%.9g,%.9g,%.9g,%.9g\n", r.step, r.epoch, r.visit, r.scene.c_str(),
                  r.iter, r.terms.bce, r.terms.eik, r.terms.smooth, r.terms.total);
    out += buf;
  }
  return out;
}

}  // namespace occsurf
