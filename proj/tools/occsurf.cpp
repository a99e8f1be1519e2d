// Command-line front end: one subcommand per pipeline stage plus e2e.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "occsurf/binary_io.hpp"
#include "occsurf/config.hpp"
#include "occsurf/error.hpp"
#include "occsurf/eval.hpp"
#include "occsurf/logging.hpp"
#include "occsurf/mesh_io.hpp"
#include "occsurf/stages.hpp"

namespace fs = std::filesystem;
using namespace occsurf;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Options {
  std::string config;
  std::string preset = "desk";
  std::string out;
  std::string e2e_out = "e2e_out";
  std::string scene;
  std::vector<std::string> scenes;
  std::string inpainter;
  std::string mode = "full";
  std::string pred, gt, crop_scene;
  int stride = 1;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig::from_preset(o.preset) : load_config(o.config);
  cfg.validate();
  return cfg;
}

void print_e2e(const std::vector<E2eRow>& rows) {
  std::printf("%-16s %6s %8s %8s %8s %10s\n", "variant", "frames", "Accu.", "Comp.", "F1", "under-furn");
  for (const auto& r : rows) {
    std::printf("%-16s %6d %8.2f %8.2f %8.2f %10.2f\n", r.variant.c_str(), r.frames, r.metrics.accuracy,
                r.metrics.completeness, r.metrics.f1, r.regional_completeness);
  }
  auto find = [&](const std::string& name) -> const E2eRow* {
    for (const auto& r : rows)
      if (r.variant == name) return &r;
    return nullptr;
  };
  const auto *full = find("full"), *geo = find("geo_only"), *full_h = find("full_half"), *geo_h = find("geo_only_half");
  if (full && geo && full_h && geo_h) {
    const double gain = full->metrics.completeness - geo->metrics.completeness;
    const double region_gain = full->regional_completeness - geo->regional_completeness;
    const double full_drop = full->metrics.completeness - full_h->metrics.completeness;
    const double geo_drop = geo->metrics.completeness - geo_h->metrics.completeness;
    std::printf("\ncompletion gain (full - geo-only): %.2f points, under furniture %.2f points\n", gain, region_gain);
    std::printf("half frames: full changes by %.2f points, geo-only drops by %.2f points\n", -full_drop, geo_drop);
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"occsurf: occluded-surface reconstruction from posed depth images"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1);
  Options o;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration file");
    sub->add_option("--preset", o.preset, "named preset when no --config is given (desk, paper)");
  };

  auto* synth = app.add_subcommand("synth", "generate training and held-out rooms");
  add_config(synth);
  synth->add_option("--out", o.out, "output directory")->required();

  auto* render = app.add_subcommand("render", "render depth frames along a scene's trajectory");
  add_config(render);
  render->add_option("--scene", o.scene, "scene directory")->required();

  auto* sample = app.add_subcommand("sample", "write SDF and ray-band sample banks");
  add_config(sample);
  sample->add_option("--scene", o.scene, "scene directory")->required();
  sample->add_option("--frame-stride", o.stride, "use every k-th frame for ray-band samples")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train-inpainter", "train the inpainter across scenes");
  add_config(train);
  train->add_option("--scenes", o.scenes, "training scene directories")->required()->expected(1, -1);
  train->add_option("--out", o.out, "checkpoint directory")->required();

  auto* optimize = app.add_subcommand("optimize", "fit the geo decoder and features of one scene");
  add_config(optimize);
  optimize->add_option("--scene", o.scene, "scene directory")->required();
  optimize->add_option("--inpainter", o.inpainter, "inpainter checkpoint")->required();
  optimize->add_option("--frame-stride", o.stride, "use every k-th frame")->check(CLI::PositiveNumber);

  auto* extract = app.add_subcommand("extract", "extract a mesh from an optimized scene");
  add_config(extract);
  extract->add_option("--scene", o.scene, "scene directory")->required();
  extract->add_option("--inpainter", o.inpainter, "inpainter checkpoint")->required();
  extract->add_option("--out", o.out, "output mesh (.ply or .obj)")->required();
  extract->add_option("--mode", o.mode, "full or geo-only")->check(CLI::IsMember({"full", "geo-only"}));
  extract->add_option("--frame-stride", o.stride, "frame stride used by optimize")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "accuracy / completeness / F1 of a mesh against ground truth");
  add_config(eval);
  eval->add_option("--pred", o.pred, "predicted mesh")->required();
  eval->add_option("--gt", o.gt, "ground-truth mesh")->required();
  eval->add_option("--crop-scene", o.crop_scene, "restrict both meshes to this scene's room interior");
  eval->add_option("--out", o.out, "CSV report path (default: stdout)");

  auto* e2e = app.add_subcommand("e2e", "run the full desk-scale experiment");
  add_config(e2e);
  e2e->add_option("--out", o.e2e_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    const RunConfig cfg = resolve_config(o);
    if (synth->parsed()) {
      run_synth(cfg, o.out);
    } else if (render->parsed()) {
      run_render(cfg, o.scene);
    } else if (sample->parsed()) {
      run_sample(cfg, o.scene, o.stride);
    } else if (train->parsed()) {
      std::vector<fs::path> dirs(o.scenes.begin(), o.scenes.end());
      run_train(cfg, dirs, o.out);
    } else if (optimize->parsed()) {
      run_optimize(cfg, o.scene, o.inpainter, o.stride);
    } else if (extract->parsed()) {
      const auto meshes = run_extract(cfg, o.scene, o.inpainter, o.stride);
      const fs::path out = o.out;
      save_mesh(o.mode == "full" ? meshes.full : meshes.geo_only, out);
      save_config(cfg, (out.has_parent_path() ? out.parent_path() : fs::path(".")) / "run.cfg");
    } else if (eval->parsed()) {
      MetricsOptions opts{cfg.eval.n_points, cfg.eval.threshold, cfg.eval.seed, std::nullopt};
      if (!o.crop_scene.empty()) opts.crop = evaluation_crop(o.crop_scene);
      const auto report = compute_metrics(load_mesh(o.pred), load_mesh(o.gt), opts);
      const std::string csv = metrics_csv_header() + metrics_csv_row(fs::path(o.pred).stem().string(), report);
      if (o.out.empty()) {
        std::cout << csv;
      } else {
        const fs::path out = o.out;
        write_file_atomic(out, csv);
        save_config(cfg, (out.has_parent_path() ? out.parent_path() : fs::path(".")) / "run.cfg");
        std::cout << metrics_table({{fs::path(o.pred).stem().string(), report}});
      }
    } else if (e2e->parsed()) {
      print_e2e(run_e2e(cfg, o.e2e_out));
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
