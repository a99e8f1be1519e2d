// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: occsurf_acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "occsurf/binary_io.hpp"
#include "occsurf/eval.hpp"
#include "occsurf/kdtree.hpp"
#include "occsurf/pipeline.hpp"
#include "occsurf/primitives.hpp"
#include "occsurf/samples.hpp"
#include "occsurf/stages.hpp"
#include "support.hpp"

using namespace occsurf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string strf(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome f1_arithmetic() {
  const double a = f1_score(84.3, 65.8), b = f1_score(92.1, 66.2);
  return {std::abs(a - 73.9) <= 0.05 && std::abs(b - 77.0) <= 0.05, strf("F1 %.3f (73.9), %.3f (77.0)", a, b)};
}

Outcome sdf_oracle() {
  const double r = 0.5;
  const auto mesh = make_icosphere(Vec3::Zero(), r, 4);  // 20 * 4^4 = 5120 triangles
  const Bvh bvh(mesh);
  const auto samples = sample_mesh_sdf(bvh, mesh, 5000, 5000, 7);
  double worst = 0;
  for (const auto& s : samples) worst = std::max(worst, std::abs(s.d_gt - (s.p.norm() - r)));
  return {samples.size() == 10000 && worst < 2e-3 * r,
          strf("%zu points on %zu triangles, max |error| %.2e (limit %.2e)", samples.size(), mesh.num_triangles(),
              worst, 2e-3 * r)};
}

Outcome gradient_suite() {
  double worst = 0;
  int checked = 0, leaked = 0;
  for (std::uint64_t seed : {1u, 2u, 3u})
    for (bool inpainter : {false, true}) {
      const auto r = support::check_objective_gradients(inpainter, seed, 80, 80);
      worst = std::max(worst, r.max_rel_error);
      checked += r.params_checked + r.features_checked;
      leaked += r.untouched_nonzero;
    }
  return {worst < 1e-4 && leaked == 0 && checked > 0,
          strf("%d derivatives over geo, inpainter and corner features, max rel error %.2e", checked, worst)};
}

Outcome isosurface_fidelity() {
  const RunConfig cfg = RunConfig::desk();
  const Vec3 c(1.0, 1.1, 0.9);
  const double r = 0.3, h = 0.02;
  const auto volume = OctreeFeatureVolume::build(support::sphere_points(c, r, 20000, 1), octree_layout(cfg), 2);
  const auto stub = support::sphere_stub(c, r);
  const auto grid = grid_for(Aabb(c - Vec3::Constant(r), c + Vec3::Constant(r)), 0.1, h, volume.layout().bounds());
  const auto mesh =
      extract_surface(volume, grid, stub, stub, cfg.extract.alpha, cfg.octree.split, cfg.samples.truncation).full;
  double worst = 0;
  for (const auto& v : mesh.vertices) worst = std::max(worst, std::abs((v - c).norm() - r));
  const bool closed = !mesh.empty() && is_watertight(mesh);
  const long chi = euler_characteristic(mesh);
  return {closed && chi == 2 && worst <= h,
          strf("max radial error %.4f m (h %.2f), watertight %d, Euler %ld", worst, h, closed, chi)};
}

Outcome metric_oracle() {
  Rng rng(5);
  std::vector<Vec3> pts, queries;
  for (int i = 0; i < 1000; ++i) pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  for (int i = 0; i < 1000; ++i) queries.emplace_back(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
  const KdTree tree(pts);
  int mismatches = 0;
  for (const auto& q : queries) {
    const auto a = tree.nearest(q), b = nearest_brute_force(pts, q);
    mismatches += a.index != b.index || a.distance != b.distance;
  }
  auto random_mesh = [](std::uint64_t seed) {
    Rng g(seed);
    const Vec3 c(uniform(g, -0.1, 0.1), uniform(g, -0.1, 0.1), uniform(g, -0.1, 0.1));
    if (uniform_index(g, 2) == 0) return make_icosphere(c, uniform(g, 0.3, 0.6), 3);
    const Vec3 e(uniform(g, 0.2, 0.6), uniform(g, 0.2, 0.6), uniform(g, 0.2, 0.6));
    return make_box(c - e, c + e);
  };
  int asymmetric = 0, non_monotone = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_mesh(1000 + 2 * s), b = random_mesh(1001 + 2 * s);
    MetricsOptions o;
    o.n = 2000;
    o.threshold = 0.05;
    const auto ab = compute_metrics(a, b, o), ba = compute_metrics(b, a, o);
    asymmetric += ab.accuracy != ba.completeness || ab.completeness != ba.accuracy || ab.f1 != ba.f1;
    MetricsReport prev;
    for (double t : {0.005, 0.01, 0.025, 0.05, 0.1, 0.2}) {
      o.threshold = t;
      const auto m = compute_metrics(a, b, o);
      non_monotone += m.accuracy < prev.accuracy || m.completeness < prev.completeness || m.f1 < prev.f1;
      prev = m;
    }
  }
  return {mismatches == 0 && asymmetric == 0 && non_monotone == 0,
          strf("kd mismatches %d/1000, asymmetric pairs %d/20, monotonicity violations %d", mismatches, asymmetric,
              non_monotone)};
}

std::map<std::string, std::string> csv_metadata(const std::string& text) {
  std::map<std::string, std::string> meta;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line) && line.starts_with("# ")) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
  }
  return meta;
}

Outcome schedule_conformance(const fs::path& work) {
  RunConfig cfg = RunConfig::desk();
  cfg.scene.train_scenes = 2;
  cfg.scene.frames = 8;
  cfg.samples.n_near = cfg.samples.n_uniform = 3000;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 64;
  cfg.nn.inpainter_hidden = 32;
  const fs::path dir = work / "schedule";
  fs::remove_all(dir);
  const auto scenes = run_synth(cfg, dir / "scenes");
  std::vector<fs::path> train;
  for (const auto& s : scenes) {
    if (load_scene_info(s / "scene.cfg").role != "train") continue;
    run_render(cfg, s);
    run_sample(cfg, s, 1);
    train.push_back(s);
  }
  run_train(cfg, train, dir / "ckpt");
  const std::string text = read_bytes(dir / "ckpt" / "loss.csv");
  const auto meta = csv_metadata(text);

  std::vector<std::string> problems;
  const int per_visit = std::stoi(meta.at("iterations_per_scene"));
  if (per_visit != 100) problems.push_back("iterations_per_scene " + std::to_string(per_visit));
  for (int level = 0; level <= cfg.octree.split; ++level) {
    const double lr = std::stod(meta.at("feature_lr_level_" + std::to_string(level)));
    const double expect = 1e-3 * std::pow(0.5, level);
    if (std::abs(lr - expect) > 1e-12 * expect) problems.push_back(strf("level %d lr %.6g", level, lr));
  }

  // Rows: step,epoch,visit,scene,iter,...; each visit is one scene for iters 0..99.
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line) && !line.starts_with("step,")) {
  }
  struct Run {
    int visit;
    std::string scene;
    int length;
  };
  std::vector<Run> runs;
  long expected_step = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string f[5];
    for (auto& x : f) std::getline(ls, x, ',');
    const long step = std::stol(f[0]);
    const int visit = std::stoi(f[2]), iter = std::stoi(f[4]);
    if (step != expected_step++) problems.push_back("step gap at " + f[0]);
    if (runs.empty() || runs.back().visit != visit) {
      if (iter != 0) problems.push_back("visit " + f[2] + " starts at iter " + f[4]);
      runs.push_back({visit, f[3], 0});
    }
    if (f[3] != runs.back().scene || iter != runs.back().length) problems.push_back("interleaved step " + f[0]);
    ++runs.back().length;
  }
  for (const auto& r : runs)
    if (r.length != per_visit) problems.push_back(strf("visit %d has %d steps", r.visit, r.length));
  const std::size_t want_visits = static_cast<std::size_t>(cfg.train.epochs) * train.size();
  if (runs.size() != want_visits) problems.push_back(strf("%zu visits, expected %zu", runs.size(), want_visits));
  std::string detail = strf("%zu visits of %d steps on %zu scenes, lr 1e-3*0.5^level for levels 0..%d", runs.size(),
                           per_visit, train.size(), cfg.octree.split);
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

struct E2eResult {
  std::vector<E2eRow> rows;
  double seconds = 0;
};

const E2eRow& row(const std::vector<E2eRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.variant == name) return r;
  throw DataError("results.csv lacks row " + name);
}

E2eResult e2e(const fs::path& out) {
  fs::remove_all(out);
  const auto t0 = Clock::now();
  E2eResult r;
  r.rows = run_e2e(RunConfig::desk(), out);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome occlusion_direction(const E2eResult& e) {
  const auto& full = row(e.rows, "full");
  const auto& geo = row(e.rows, "geo_only");
  const double gain = full.metrics.completeness - geo.metrics.completeness;
  const double regional = full.regional_completeness - geo.regional_completeness;
  return {gain >= 5 && regional >= 20 && e.seconds < 45 * 60,
          strf("completeness %.2f vs geo-only %.2f (gain %.2f, need 5); under-furniture %.2f vs %.2f (gain %.2f, "
              "need 20); %.1f min",
              full.metrics.completeness, geo.metrics.completeness, gain, full.regional_completeness,
              geo.regional_completeness, regional, e.seconds / 60)};
}

Outcome sparsity_direction(const E2eResult& e) {
  const double full = row(e.rows, "full").metrics.completeness, full_half = row(e.rows, "full_half").metrics.completeness;
  const double geo = row(e.rows, "geo_only").metrics.completeness, geo_half = row(e.rows, "geo_only_half").metrics.completeness;
  const double full_drop = full - full_half, geo_drop = geo - geo_half;
  return {std::abs(full_drop) < 5 && geo_drop > full_drop,
          strf("full %.2f -> %.2f (change %.2f), geo-only %.2f -> %.2f (drop %.2f)", full, full_half, -full_drop, geo,
              geo_half, geo_drop)};
}

Outcome determinism(const fs::path& a, const fs::path& b, double seconds) {
  std::vector<fs::path> files{"results.csv"};
  for (const auto& entry : fs::directory_iterator(a / "meshes")) files.push_back(fs::relative(entry.path(), a));
  std::vector<std::string> differing;
  for (const auto& f : files) {
    if (!fs::exists(b / f) || read_bytes(a / f) != read_bytes(b / f)) differing.push_back(f.string());
  }
  std::string detail = strf("%zu files compared, second run %.1f min", files.size(), seconds / 60);
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && files.size() > 1, detail};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "occsurf_acceptance";
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "F1 arithmetic", f1_arithmetic);
  report(2, "SDF oracle", sdf_oracle);
  report(3, "gradient suite", gradient_suite);
  report(4, "isosurface fidelity", isosurface_fidelity);
  report(7, "schedule conformance", [&] { return schedule_conformance(work); });
  report(9, "metric oracle", metric_oracle);

  E2eResult first, second;
  std::string e2e_error;
  try {
    first = e2e(work / "e2e_a");
    second = e2e(work / "e2e_b");
  } catch (const std::exception& e) {
    e2e_error = e.what();
  }
  auto guarded = [&](auto f) {
    return [&, f] { return e2e_error.empty() ? f() : Outcome{false, "e2e failed: " + e2e_error}; };
  };
  report(5, "occlusion completion", guarded([&] { return occlusion_direction(first); }));
  report(6, "frame sparsity", guarded([&] { return sparsity_direction(first); }));
  report(8, "determinism", guarded([&] { return determinism(work / "e2e_a", work / "e2e_b", second.seconds); }));

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
