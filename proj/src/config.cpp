#include "occsurf/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"

namespace occsurf {

namespace {

using FieldRef = std::variant<int*, double*, std::uint64_t*>;

struct Field {
  const char* section;
  const char* key;
  FieldRef ref;
};

std::vector<Field> fields(RunConfig& c) {
  return {
      {"scene", "train_scenes", &c.scene.train_scenes},
      {"scene", "seed", &c.scene.seed},
      {"scene", "room_min", &c.scene.room_min},
      {"scene", "room_max", &c.scene.room_max},
      {"scene", "height_min", &c.scene.height_min},
      {"scene", "height_max", &c.scene.height_max},
      {"scene", "furniture_min", &c.scene.furniture_min},
      {"scene", "furniture_max", &c.scene.furniture_max},
      {"scene", "wall_thickness", &c.scene.wall_thickness},
      {"scene", "frames", &c.scene.frames},
      {"scene", "camera_height", &c.scene.camera_height},
      {"scene", "orbit_fraction", &c.scene.orbit_fraction},
      {"scene", "look_height", &c.scene.look_height},
      {"render", "width", &c.render.width},
      {"render", "height", &c.render.height},
      {"render", "fov_deg", &c.render.fov_deg},
      {"render", "max_range", &c.render.max_range},
      {"octree", "levels", &c.octree.levels},
      {"octree", "split", &c.octree.split},
      {"octree", "feature_dim", &c.octree.feature_dim},
      {"octree", "voxel_size", &c.octree.voxel_size},
      {"octree", "origin", &c.octree.origin},
      {"octree", "init_seed", &c.octree.init_seed},
      {"samples", "truncation", &c.samples.truncation},
      {"samples", "sigma_near", &c.samples.sigma_near},
      {"samples", "n_near", &c.samples.n_near},
      {"samples", "n_uniform", &c.samples.n_uniform},
      {"samples", "per_ray", &c.samples.per_ray},
      {"samples", "seed", &c.samples.seed},
      {"nn", "pe_bands", &c.nn.pe_bands},
      {"nn", "geo_hidden", &c.nn.geo_hidden},
      {"nn", "inpainter_hidden", &c.nn.inpainter_hidden},
      {"nn", "dropout", &c.nn.dropout},
      {"nn", "sigma", &c.nn.sigma},
      {"nn", "lambda_eik", &c.nn.lambda_eik},
      {"nn", "lambda_smooth", &c.nn.lambda_smooth},
      {"nn", "eps_mag", &c.nn.eps_mag},
      {"nn", "fd_step", &c.nn.fd_step},
      {"train", "epochs", &c.train.epochs},
      {"train", "iterations_per_scene", &c.train.iterations_per_scene},
      {"train", "batch_size", &c.train.batch_size},
      {"train", "inpainter_lr", &c.train.inpainter_lr},
      {"train", "feature_lr", &c.train.feature_lr},
      {"train", "feature_lr_decay", &c.train.feature_lr_decay},
      {"train", "seed", &c.train.seed},
      {"optimize", "iterations", &c.optimize.iterations},
      {"optimize", "batch_size", &c.optimize.batch_size},
      {"optimize", "geo_lr", &c.optimize.geo_lr},
      {"optimize", "seed", &c.optimize.seed},
      {"extract", "grid_res", &c.extract.grid_res},
      {"extract", "alpha", &c.extract.alpha},
      {"extract", "margin", &c.extract.margin},
      {"eval", "n_points", &c.eval.n_points},
      {"eval", "threshold", &c.eval.threshold},
      {"eval", "seed", &c.eval.seed},
  };
}

std::string format_value(const FieldRef& ref) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          // Shortest representation that round-trips.
          char buf[64];
          const auto res = std::to_chars(buf, buf + sizeof buf, *p);
          return std::string(buf, res.ptr);
        } else {
          return std::to_string(*p);
        }
      },
      ref);
}

void parse_value(const FieldRef& ref, const std::string& text, const std::string& where) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        std::istringstream is(text);
        T value{};
        if (!(is >> value) || !(is >> std::ws).eof()) {
          throw ParseError(where + ": cannot parse '" + text + "'");
        }
        *p = value;
      },
      ref);
}

}  // namespace

std::string toolkit_version() { return OCCSURF_VERSION; }

RunConfig RunConfig::paper() {
  RunConfig c;
  c.preset = "paper";
  c.scene.room_min = 3.0;
  c.scene.room_max = 8.0;
  c.scene.height_min = 2.4;
  c.scene.height_max = 3.0;
  c.scene.furniture_min = 3;
  c.scene.furniture_max = 10;
  c.scene.frames = 200;
  c.render.width = 1024;
  c.render.height = 768;
  c.render.fov_deg = 120.0;
  c.octree.levels = 9;
  c.octree.split = 4;
  c.octree.voxel_size = 0.02;
  c.nn.inpainter_hidden = 256;
  c.samples.n_near = 8000000;
  c.samples.n_uniform = 8000000;
  c.train.epochs = 100;
  c.train.batch_size = 4096;
  c.optimize.batch_size = 4096;
  c.optimize.iterations = 10000;
  c.extract.grid_res = 0.01;
  c.extract.alpha = 3;
  c.eval.n_points = 1000000;
  return c;
}

RunConfig RunConfig::from_preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ArgumentError("unknown preset '" + name + "' (expected desk or paper)");
}

double RunConfig::feature_lr_at(int level) const { return train.feature_lr * std::pow(train.feature_lr_decay, level); }

double RunConfig::octree_side() const { return std::ldexp(octree.voxel_size, octree.levels); }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ArgumentError("invalid config: " + what);
  };
  require(scene.train_scenes >= 1, "scene.train_scenes >= 1");
  require(scene.room_min >= 1.0 && scene.room_min <= scene.room_max, "scene.room_min <= room_max");
  require(scene.height_min > 1.0 && scene.height_min <= scene.height_max, "scene.height_min <= height_max");
  require(scene.furniture_min >= 0 && scene.furniture_min <= scene.furniture_max && scene.furniture_max <= 10,
          "0 <= furniture_min <= furniture_max <= 10");
  require(scene.wall_thickness > 0, "scene.wall_thickness > 0");
  require(scene.frames >= 1, "scene.frames >= 1");
  require(render.width >= 1 && render.height >= 1, "render size >= 1");
  require(render.fov_deg > 0 && render.fov_deg < 180, "render.fov_deg in (0, 180)");
  require(render.max_range > 0, "render.max_range > 0");
  require(octree.levels >= 1 && octree.levels <= 16, "octree.levels in [1, 16]");
  require(octree.split >= 0 && octree.split < octree.levels, "0 <= octree.split < octree.levels");
  require(octree.feature_dim >= 1, "octree.feature_dim >= 1");
  require(octree.voxel_size > 0, "octree.voxel_size > 0");
  require(samples.truncation > 0, "samples.truncation > 0");
  require(samples.sigma_near > 0, "samples.sigma_near > 0");
  require(samples.n_near >= 0 && samples.n_uniform >= 0, "sample counts >= 0");
  require(samples.per_ray >= 1, "samples.per_ray >= 1");
  require(nn.pe_bands >= 0, "nn.pe_bands >= 0");
  require(nn.geo_hidden >= 1 && nn.inpainter_hidden >= 1, "hidden widths >= 1");
  require(nn.dropout >= 0 && nn.dropout < 1, "nn.dropout in [0, 1)");
  require(nn.sigma > 0, "nn.sigma > 0");
  require(nn.lambda_eik >= 0 && nn.lambda_smooth >= 0, "loss weights >= 0");
  require(nn.eps_mag >= 0, "nn.eps_mag >= 0");
  require(nn.fd_step > 0, "nn.fd_step > 0");
  require(train.epochs >= 0, "train.epochs >= 0");
  require(train.iterations_per_scene >= 1, "train.iterations_per_scene >= 1");
  require(train.batch_size >= 1 && optimize.batch_size >= 1, "batch sizes >= 1");
  require(train.inpainter_lr > 0 && train.feature_lr > 0 && train.feature_lr_decay > 0, "learning rates > 0");
  require(optimize.iterations >= 0, "optimize.iterations >= 0");
  require(optimize.geo_lr > 0, "optimize.geo_lr > 0");
  require(extract.grid_res > 0, "extract.grid_res > 0");
  require(extract.alpha >= 0, "extract.alpha >= 0");
  require(extract.margin >= 0, "extract.margin >= 0");
  require(eval.n_points >= 1, "eval.n_points >= 1");
  require(eval.threshold > 0, "eval.threshold > 0");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  std::string preset = "desk";
  if (auto meta = tree.get_child_optional("meta")) {
    for (const auto& [key, node] : *meta) {
      if (key == "preset") {
        preset = node.data();
      } else if (key != "version") {
        throw ParseError(source + ": unknown key 'meta." + key + "'");
      }
    }
  }
  RunConfig config = RunConfig::from_preset(preset);
  auto table = fields(config);
  for (const auto& [section, children] : tree) {
    if (section == "meta") continue;
    if (children.empty() && !children.data().empty()) {
      throw ParseError(source + ": key '" + section + "' outside of a section");
    }
    for (const auto& [key, node] : children) {
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return section == f.section && key == f.key; });
      if (it == table.end()) throw ParseError(source + ": unknown key '" + section + "." + key + "'");
      parse_value(it->ref, node.data(), source + ": " + section + "." + key);
    }
  }
  config.validate();
  return config;
}

std::string format_config(const RunConfig& config) {
  RunConfig copy = config;
  std::ostringstream os;
  os << "[meta]\npreset = " << config.preset << "\nversion = " << toolkit_version() << "\n";
  std::string current;
  for (const auto& f : fields(copy)) {
    if (current != f.section) {
      current = f.section;
      os << "\n[" << current << "]\n";
    }
    os << f.key << " = " << format_value(f.ref) << "\n";
  }
  return os.str();
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path), path.string()); }

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  write_file_atomic(path, format_config(config));
}

}  // namespace occsurf
