#include "occsurf/stages.hpp"

#include <cstdio>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <spdlog/spdlog.h>

#include "occsurf/binary_io.hpp"
#include "occsurf/bvh.hpp"
#include "occsurf/error.hpp"
#include "occsurf/mesh_io.hpp"
#include "occsurf/octree.hpp"
#include "occsurf/pipeline.hpp"
#include "occsurf/render.hpp"
#include "occsurf/rng.hpp"
#include "occsurf/samples.hpp"
#include "occsurf/scenegen.hpp"

namespace fs = std::filesystem;

namespace occsurf {

namespace {

constexpr std::uint64_t kTagScene = 0x53434e;
constexpr std::uint64_t kTagInit = 0x494e4954;
constexpr std::uint64_t kTagGeo = 0x47454f;
constexpr std::uint64_t kTagBank = 0x42414e4b;

std::string stride_suffix(int stride) { return stride == 1 ? "" : "_s" + std::to_string(stride); }

void require_stride(int stride) {
  if (stride < 1) throw ArgumentError("frame stride must be >= 1");
}

std::vector<Vec3> unprojected_points(const std::vector<DepthFrame>& frames) {
  std::vector<Vec3> pts;
  for (const auto& f : frames)
    for (const auto& o : unproject(f)) pts.push_back(o.point);
  return pts;
}

OctreeFeatureVolume scene_volume(const RunConfig& cfg, const std::vector<Vec3>& points, std::uint64_t scene_seed) {
  if (points.empty()) throw DataError("no valid depth pixels to build the octree from");
  return OctreeFeatureVolume::build(points, octree_layout(cfg), derive_seed(cfg.octree.init_seed, scene_seed));
}

Decoder load_checked(const fs::path& path, const nn::MlpArch& expected, const char* what) {
  if (!fs::exists(path)) throw DataError(std::string("missing ") + what + " checkpoint " + path.string());
  auto net = nn::load_decoder<float>(path);
  if (!(net.arch() == expected)) {
    throw DataError(path.string() + ": " + what + " architecture does not match the run configuration");
  }
  return net;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

namespace layout {
fs::path gt_mesh(const fs::path& scene) { return scene / "gt" / "complete.ply"; }
fs::path frames(const fs::path& scene) { return scene / "frames"; }
fs::path sdf_bank(const fs::path& scene) { return scene / "samples" / "sdf.bin"; }
fs::path ray_band(const fs::path& scene, int stride) {
  return scene / "samples" / ("ray_band" + stride_suffix(stride) + ".bin");
}
fs::path geo_ckpt(const fs::path& scene, int stride) {
  return scene / "ckpt" / ("geo_" + scene_id(scene) + stride_suffix(stride) + ".bin");
}
fs::path volume_ckpt(const fs::path& scene, int stride) {
  return scene / "ckpt" / ("volume_" + scene_id(scene) + stride_suffix(stride) + ".bin");
}
std::string scene_id(const fs::path& scene) {
  const fs::path p = scene.filename().empty() ? scene.parent_path() : scene;
  return p.filename().string();
}
}  // namespace layout

void save_poses(const std::vector<Pose>& poses, const fs::path& path) {
  std::ostringstream os;
  os << "[poses]\ncount = " << poses.size() << "\n";
  char buf[128];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    os << "\n[pose_" << i << "]\nrotation =";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, " %.17g", poses[i].rotation(r, c));
        os << buf;
      }
    std::snprintf(buf, sizeof buf, "\ntranslation = %.17g %.17g %.17g\n", poses[i].translation.x(),
                  poses[i].translation.y(), poses[i].translation.z());
    os << buf;
  }
  write_file_atomic(path, os.str());
}

std::vector<Pose> load_poses(const fs::path& path) {
  namespace pt = boost::property_tree;
  if (!fs::exists(path)) throw DataError("missing pose file " + path.string());
  pt::ptree tree;
  std::istringstream is(read_file(path));
  std::vector<Pose> poses;
  try {
    pt::read_ini(is, tree);
    const auto count = tree.get<std::size_t>("poses.count");
    for (std::size_t i = 0; i < count; ++i) {
      const std::string sec = "pose_" + std::to_string(i);
      std::istringstream rs(tree.get<std::string>(sec + ".rotation"));
      std::istringstream ts(tree.get<std::string>(sec + ".translation"));
      Mat3 r;
      Vec3 t;
      for (int k = 0; k < 9; ++k)
        if (!(rs >> r(k / 3, k % 3))) throw ParseError(path.string() + ": malformed rotation in " + sec);
      if (!(ts >> t.x() >> t.y() >> t.z())) throw ParseError(path.string() + ": malformed translation in " + sec);
      poses.push_back(Pose::from(r, t));
    }
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  } catch (const pt::ptree_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return poses;
}

std::vector<fs::path> run_synth(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  std::vector<fs::path> dirs;
  const int total = cfg.scene.train_scenes + 1;
  for (int i = 0; i < total; ++i) {
    const bool test = i == cfg.scene.train_scenes;
    char name[32];
    std::snprintf(name, sizeof name, test ? "test_%02d" : "train_%02d", test ? 0 : i);
    const fs::path dir = out / name;
    Rng rng(derive_seed(cfg.scene.seed, kTagScene, static_cast<std::uint64_t>(i)));
    SceneSpec spec;
    spec.seed = rng();
    spec.size_x = uniform(rng, cfg.scene.room_min, cfg.scene.room_max);
    spec.size_y = uniform(rng, cfg.scene.room_min, cfg.scene.room_max);
    spec.height = uniform(rng, cfg.scene.height_min, cfg.scene.height_max);
    spec.furniture_count = cfg.scene.furniture_min +
                           static_cast<int>(uniform_index(rng, cfg.scene.furniture_max - cfg.scene.furniture_min + 1));
    spec.wall_thickness = cfg.scene.wall_thickness;
    const Scene scene = generate_scene(spec);
    const Bvh bvh(scene.complete);
    const auto traj = default_trajectory(scene, cfg.scene.frames, cfg.scene.camera_height, cfg.scene.orbit_fraction,
                                         cfg.scene.look_height);
    auto poses = sample_trajectory(traj, &bvh);
    poses.resize(std::min<std::size_t>(poses.size(), cfg.scene.frames));
    save_scene_info(scene, test ? "test" : "train", dir / "scene.cfg");
    save_mesh(scene.complete, layout::gt_mesh(dir));
    save_mesh(scene.layout, dir / "gt" / "layout.ply");
    save_poses(poses, dir / "poses.cfg");
    save_config(cfg, dir / "run.cfg");
    spdlog::info("synth {}: {:.2f} x {:.2f} x {:.2f} m, {} furniture, {} poses", name, spec.size_x, spec.size_y,
                 spec.height, scene.furniture.size(), poses.size());
    dirs.push_back(dir);
  }
  save_config(cfg, out / "run.cfg");
  return dirs;
}

void run_render(const RunConfig& cfg, const fs::path& scene) {
  const TriangleMesh mesh = load_mesh(layout::gt_mesh(scene));
  const Bvh bvh(mesh);
  const auto poses = load_poses(scene / "poses.cfg");
  const auto k = Intrinsics::from_fov(cfg.render.width, cfg.render.height, cfg.render.fov_deg);
  std::vector<std::string> stems;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%03zu", i);
    save_frame(render_depth(bvh, poses[i], k, cfg.render.max_range), layout::frames(scene), stem);
    stems.push_back(stem);
  }
  save_manifest(layout::frames(scene), stems);
  save_config(cfg, scene / "run.cfg");
  spdlog::info("render {}: {} frames at {}x{}", layout::scene_id(scene), stems.size(), k.width, k.height);
}

void run_sample(const RunConfig& cfg, const fs::path& scene, int stride) {
  require_stride(stride);
  const auto info = load_scene_info(scene / "scene.cfg");
  if (info.role == "train") {
    const TriangleMesh mesh = load_mesh(layout::gt_mesh(scene));
    const Bvh bvh(mesh);
    MeshSamplingOptions opts;
    opts.sigma_near = cfg.samples.sigma_near;
    auto bank = sample_mesh_sdf(bvh, mesh, cfg.samples.n_near, cfg.samples.n_uniform,
                                derive_seed(cfg.samples.seed, info.spec.seed), opts);
    label_visibility(bank, load_frames(layout::frames(scene)), cfg.samples.truncation);
    save_sample_bank(bank, layout::sdf_bank(scene));
    std::size_t visible = 0;
    for (const auto& s : bank) visible += s.visibility == Visibility::Visible;
    spdlog::info("sample {}: {} SDF samples, {} visible", layout::scene_id(scene), bank.size(), visible);
  }
  const auto stems = load_manifest(layout::frames(scene));
  std::vector<SdfSample> band;
  for (std::size_t i = 0; i < stems.size(); i += stride) {
    const auto frame = load_frame(layout::frames(scene), stems[i]);
    const auto s = ray_band_samples(frame, cfg.samples.per_ray, cfg.samples.truncation,
                                    derive_seed(cfg.samples.seed ^ kTagBank, info.spec.seed, i));
    band.insert(band.end(), s.begin(), s.end());
  }
  save_sample_bank(band, layout::ray_band(scene, stride));
  save_config(cfg, scene / "run.cfg");
  spdlog::info("sample {}: {} ray-band samples (frame stride {})", layout::scene_id(scene), band.size(), stride);
}

void run_train(const RunConfig& cfg, const std::vector<fs::path>& scene_dirs, const fs::path& ckpt) {
  cfg.validate();
  std::vector<TrainingScene> scenes;
  std::vector<std::string> ids;
  for (const auto& dir : scene_dirs) {
    const auto info = load_scene_info(dir / "scene.cfg");
    const std::string id = layout::scene_id(dir);
    if (info.role != "train" || !fs::exists(layout::gt_mesh(dir))) {
      throw DataError("scene " + id + " has no complete mesh and cannot be used for training");
    }
    if (!fs::exists(layout::sdf_bank(dir))) throw DataError("missing SDF sample bank for scene " + id + "; run sample first");
    TrainingScene ts{id, scene_volume(cfg, unprojected_points(load_frames(layout::frames(dir))), info.spec.seed), {}};
    ts.bank = covered_samples(load_sample_bank(layout::sdf_bank(dir)), ts.volume, 0, cfg.octree.split);
    spdlog::info("train: scene {} with {} covered samples, {} finest nodes", id, ts.bank.size(),
                 ts.volume.num_nodes(cfg.octree.levels));
    scenes.push_back(std::move(ts));
    ids.push_back(id);
  }
  Decoder inpainter(inpainter_arch(cfg));
  inpainter.init(derive_seed(cfg.train.seed, kTagInit));
  const auto meta = decoder_meta(cfg, "inpainter");
  std::vector<LossRow> rows;
  TrainCallbacks cb;
  cb.on_step = [&](const LossRow& r) { rows.push_back(r); };
  cb.on_visit = [&](std::size_t s) {
    nn::save_decoder(inpainter, meta, ckpt / "inpainter.bin");
    scenes[s].volume.save(ckpt / ("volume_" + scenes[s].id + ".bin"));
    const auto& last = rows.back();
    spdlog::info("train: epoch {} visit {} scene {}: bce {:.4f} total {:.4f}", last.epoch, last.visit, last.scene,
                 last.terms.bce, last.terms.total);
  };
  try {
    train_inpainter(scenes, inpainter, cfg, cb);
  } catch (const NumericalError&) {
    write_file_atomic(ckpt / "loss.csv", format_loss_csv(rows, cfg, ids));
    throw;
  }
  nn::save_decoder(inpainter, meta, ckpt / "inpainter.bin");
  for (const auto& s : scenes) s.volume.save(ckpt / ("volume_" + s.id + ".bin"));
  write_file_atomic(ckpt / "loss.csv", format_loss_csv(rows, cfg, ids));
  std::ostringstream sched;
  sched << "[schedule]\nepochs = " << cfg.train.epochs << "\niterations_per_scene = " << cfg.train.iterations_per_scene
        << "\nbatch_size = " << cfg.train.batch_size << "\ninpainter_lr = " << fmt("%.10g", cfg.train.inpainter_lr)
        << "\nfeature_lr = " << fmt("%.10g", cfg.train.feature_lr)
        << "\nfeature_lr_decay = " << fmt("%.10g", cfg.train.feature_lr_decay) << "\nseed = " << cfg.train.seed
        << "\nsteps = " << rows.size() << "\nscenes = ";
  for (std::size_t i = 0; i < ids.size(); ++i) sched << (i ? " " : "") << ids[i];
  sched << "\n";
  write_file_atomic(ckpt / "schedule.cfg", sched.str());
  save_config(cfg, ckpt / "run.cfg");
}

void run_optimize(const RunConfig& cfg, const fs::path& scene, const fs::path& inpainter_path, int stride) {
  require_stride(stride);
  cfg.validate();
  const auto info = load_scene_info(scene / "scene.cfg");
  const auto band_path = layout::ray_band(scene, stride);
  if (!fs::exists(band_path)) {
    throw DataError("missing ray-band samples " + band_path.string() + "; run sample with --frame-stride " +
                    std::to_string(stride));
  }
  const Decoder inpainter = load_checked(inpainter_path, inpainter_arch(cfg), "inpainter");
  auto volume = scene_volume(cfg, unprojected_points(load_frames(layout::frames(scene), stride)), info.spec.seed);
  const auto band = covered_samples(load_sample_bank(band_path), volume, 0, cfg.octree.levels);
  Decoder geo(geo_arch(cfg));
  geo.init(derive_seed(cfg.optimize.seed, kTagGeo, info.spec.seed));
  std::string log = "step,geo_bce,geo_total,inpainter_bce,inpainter_total\n";
  char buf[256];
  optimize_scene(volume, geo, inpainter, band, cfg, cfg.optimize.iterations, [&](const OptimizeRow& r) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g\n", r.step, r.geo.bce, r.geo.total, r.inpainter.bce,
                  r.inpainter.total);
    log += buf;
    if ((r.step + 1) % 100 == 0) {
      spdlog::info("optimize {}: step {} geo {:.4f} inpainter {:.4f}", layout::scene_id(scene), r.step + 1,
                   r.geo.total, r.inpainter.total);
    }
  });
  nn::save_decoder(geo, decoder_meta(cfg, "geo"), layout::geo_ckpt(scene, stride));
  volume.save(layout::volume_ckpt(scene, stride));
  write_file_atomic(scene / "ckpt" / ("optimize_" + layout::scene_id(scene) + stride_suffix(stride) + ".csv"), log);
  save_config(cfg, scene / "ckpt" / "run.cfg");
}

ExtractedMeshes run_extract(const RunConfig& cfg, const fs::path& scene, const fs::path& inpainter_path, int stride) {
  require_stride(stride);
  const auto geo_path = layout::geo_ckpt(scene, stride);
  if (!fs::exists(geo_path)) throw DataError("missing geo checkpoint " + geo_path.string() + "; run optimize first");
  const Decoder geo = load_checked(geo_path, geo_arch(cfg), "geo");
  const Decoder inpainter = load_checked(inpainter_path, inpainter_arch(cfg), "inpainter");
  const auto volume = OctreeFeatureVolume::load(layout::volume_ckpt(scene, stride));
  const GridSpec grid = grid_for(coverage_bounds(volume, cfg.octree.split), cfg.extract.margin, cfg.extract.grid_res,
                                 volume.layout().bounds());
  const auto ex = extract_surface(volume, grid, decoder_sdf(geo, fine_input(volume, cfg)),
                                  decoder_sdf(inpainter, coarse_input(volume, cfg)), cfg.extract.alpha,
                                  cfg.octree.split, cfg.samples.truncation);
  spdlog::info("extract {}: {}x{}x{} grid, {} geo / {} inpainter / {} free points, {} + {} triangles",
               layout::scene_id(scene), grid.nx, grid.ny, grid.nz, ex.geo_points, ex.inpainter_points, ex.free_points,
               ex.full.num_triangles(), ex.geo_only.num_triangles());
  return {ex.full, ex.geo_only};
}

Aabb evaluation_crop(const fs::path& scene) {
  const auto info = load_scene_info(scene / "scene.cfg");
  return Aabb(Vec3::Zero(), Vec3(info.spec.size_x, info.spec.size_y, info.spec.height)).padded(0.05);
}

std::vector<E2eRow> run_e2e(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto scenes = run_synth(cfg, out / "scenes");
  std::vector<fs::path> train;
  for (const auto& s : scenes) {
    run_render(cfg, s);
    run_sample(cfg, s, 1);
    if (load_scene_info(s / "scene.cfg").role == "train") train.push_back(s);
  }
  const fs::path test = scenes.back();
  run_sample(cfg, test, 2);
  run_train(cfg, train, out / "ckpt");

  const TriangleMesh gt = load_mesh(layout::gt_mesh(test));
  const Bvh gt_bvh(gt);
  const auto info = load_scene_info(test / "scene.cfg");
  MetricsOptions opts{cfg.eval.n_points, cfg.eval.threshold, cfg.eval.seed, evaluation_crop(test)};
  const auto gt_samples = sample_surface(crop_mesh(gt, *opts.crop), opts.n, opts.seed);
  const auto region = under_furniture_floor(gt_samples, info.furniture, gt_bvh);
  const int all_frames = static_cast<int>(load_manifest(layout::frames(test)).size());

  std::vector<E2eRow> rows;
  for (int stride : {1, 2}) {
    run_optimize(cfg, test, out / "ckpt" / "inpainter.bin", stride);
    const auto meshes = run_extract(cfg, test, out / "ckpt" / "inpainter.bin", stride);
    const std::string suffix = stride == 1 ? "" : "_half";
    const int frames = (all_frames + stride - 1) / stride;
    for (const auto& [name, mesh] : {std::pair<std::string, const TriangleMesh*>{"full" + suffix, &meshes.full},
                                     std::pair<std::string, const TriangleMesh*>{"geo_only" + suffix, &meshes.geo_only}}) {
      save_mesh(*mesh, out / "meshes" / (name + ".ply"));
      E2eRow row{name, frames, compute_metrics(*mesh, gt, opts), 0.0};
      const TriangleMesh cropped = crop_mesh(*mesh, *opts.crop);
      row.regional_completeness =
          cropped.empty() ? 0.0 : regional_completeness(region, sample_surface(cropped, opts.n, opts.seed), opts.threshold);
      spdlog::info("e2e {}: accuracy {:.2f} completeness {:.2f} f1 {:.2f} under-furniture {:.2f} ({} region samples)",
                   name, row.metrics.accuracy, row.metrics.completeness, row.metrics.f1, row.regional_completeness,
                   region.size());
      rows.push_back(row);
    }
  }
  write_file_atomic(out / "results.csv", format_e2e_csv(rows));
  save_config(cfg, out / "run.cfg");
  return rows;
}

std::string format_e2e_csv(const std::vector<E2eRow>& rows) {
  std::string out = "variant,frames,accuracy,completeness,f1,regional_completeness,threshold,n,seed\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.4f,%.4f,%.4f,%.4f,%.4f,%d,%llu\n", r.variant.c_str(), r.frames,
                  r.metrics.accuracy, r.metrics.completeness, r.metrics.f1, r.regional_completeness, r.metrics.threshold,
                  r.metrics.n, static_cast<unsigned long long>(r.metrics.seed));
    out += buf;
  }
  return out;
}

std::vector<E2eRow> parse_e2e_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::vector<E2eRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw ParseError("results.csv: expected 9 columns in '" + line + "'");
    E2eRow r;
    r.variant = cells[0];
    r.frames = std::stoi(cells[1]);
    r.metrics.accuracy = std::stod(cells[2]);
    r.metrics.completeness = std::stod(cells[3]);
    r.metrics.f1 = std::stod(cells[4]);
    r.regional_completeness = std::stod(cells[5]);
    r.metrics.threshold = std::stod(cells[6]);
    r.metrics.n = std::stoi(cells[7]);
    r.metrics.seed = std::stoull(cells[8]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace occsurf
