#include "occsurf/render.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"

namespace occsurf {

Intrinsics Intrinsics::from_fov(int width, int height, double fov_deg) {
  if (!(fov_deg > 0 && fov_deg < 180)) throw ArgumentError("field of view must be in (0, 180) degrees");
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = (0.5 * width) / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  k.validate();
  return k;
}

void Intrinsics::validate() const {
  if (width < 1 || height < 1) throw ArgumentError("image size must be at least 1x1");
  if (!(fx > 0 && fy > 0)) throw ArgumentError("focal lengths must be positive");
}

std::size_t DepthFrame::valid_count() const {
  std::size_t n = 0;
  for (float d : depth) n += d > 0.0f;
  return n;
}

DepthFrame render_depth(const Bvh& bvh, const Pose& pose, const Intrinsics& k, double max_range) {
  k.validate();
  check_rotation(pose.rotation);
  DepthFrame frame{k, pose, std::vector<float>(static_cast<std::size_t>(k.width) * k.height, 0.0f)};
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray_cam = k.pixel_ray(u, v);
      const double len = ray_cam.norm();
      const Vec3 dir = pose.rotation * (ray_cam / len);
      // z = t / len for a unit ray; bound t so that z <= max_range.
      const auto hit = bvh.ray_cast(pose.translation, dir.normalized(), max_range * len);
      if (!hit) continue;
      const double z = hit->t / len;
      if (z <= max_range) frame.depth[static_cast<std::size_t>(v) * k.width + u] = static_cast<float>(z);
    }
  }
  return frame;
}

std::vector<ObservedPoint> unproject(const DepthFrame& frame) {
  const Intrinsics& k = frame.intrinsics;
  std::vector<ObservedPoint> out;
  out.reserve(frame.valid_count());
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const double d = frame.at(u, v);
      if (!(d > 0.0)) continue;
      const Vec3 cam(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
      const Vec3 world = frame.pose.apply(cam);
      out.push_back({world, (world - frame.pose.translation).normalized()});
    }
  }
  return out;
}

std::string format_pfm(const std::vector<float>& data, int width, int height) {
  std::ostringstream os(std::ios::binary);
  os << "Pf\n" << width << " " << height << "\n-1.0\n";
  for (int row = height - 1; row >= 0; --row) {
    os.write(reinterpret_cast<const char*>(data.data() + static_cast<std::size_t>(row) * width),
             static_cast<std::streamsize>(sizeof(float) * width));
  }
  return os.str();
}

std::vector<float> parse_pfm(const std::string& bytes, int& width, int& height, const std::string& source) {
  std::istringstream is(bytes);
  std::string magic;
  double scale = 0;
  if (!(is >> magic) || magic != "Pf") throw ParseError(source + ": not a single-channel PFM (expected 'Pf')");
  if (!(is >> width >> height >> scale) || width < 1 || height < 1) throw ParseError(source + ": malformed PFM header");
  if (scale >= 0) throw ParseError(source + ": big-endian PFM is not supported");
  is.get();  // single whitespace byte before the raster
  const auto offset = static_cast<std::size_t>(is.tellg());
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() < offset + count * sizeof(float)) {
    throw ParseError(source + ": truncated PFM raster at byte " + std::to_string(bytes.size()));
  }
  std::vector<float> data(count);
  for (int row = 0; row < height; ++row) {
    const int dst = height - 1 - row;
    std::memcpy(data.data() + static_cast<std::size_t>(dst) * width,
                bytes.data() + offset + static_cast<std::size_t>(row) * width * sizeof(float), sizeof(float) * width);
  }
  return data;
}

namespace {

boost::property_tree::ptree read_ini_file(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(read_file(path));
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  return tree;
}

}  // namespace

void save_frame(const DepthFrame& frame, const std::filesystem::path& dir, const std::string& stem) {
  const Intrinsics& k = frame.intrinsics;
  write_file_atomic(dir / (stem + ".pfm"), format_pfm(frame.depth, k.width, k.height));
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof buf, "[intrinsics]\nwidth = %d\nheight = %d\nfx = %.17g\nfy = %.17g\ncx = %.17g\ncy = %.17g\n",
                k.width, k.height, k.fx, k.fy, k.cx, k.cy);
  os << buf << "\n[pose]\nrotation =";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", frame.pose.rotation(r, c));
      os << buf;
    }
  std::snprintf(buf, sizeof buf, "\ntranslation = %.17g %.17g %.17g\n", frame.pose.translation.x(),
                frame.pose.translation.y(), frame.pose.translation.z());
  os << buf;
  write_file_atomic(dir / (stem + ".cfg"), os.str());
}

DepthFrame load_frame(const std::filesystem::path& dir, const std::string& stem) {
  const auto cfg_path = dir / (stem + ".cfg");
  const auto tree = read_ini_file(cfg_path);
  DepthFrame frame;
  try {
    Intrinsics& k = frame.intrinsics;
    k.width = tree.get<int>("intrinsics.width");
    k.height = tree.get<int>("intrinsics.height");
    k.fx = tree.get<double>("intrinsics.fx");
    k.fy = tree.get<double>("intrinsics.fy");
    k.cx = tree.get<double>("intrinsics.cx");
    k.cy = tree.get<double>("intrinsics.cy");
    std::istringstream rs(tree.get<std::string>("pose.rotation"));
    std::istringstream ts(tree.get<std::string>("pose.translation"));
    Mat3 r;
    Vec3 t;
    for (int i = 0; i < 9; ++i)
      if (!(rs >> r(i / 3, i % 3))) throw ParseError(cfg_path.string() + ": malformed rotation");
    if (!(ts >> t.x() >> t.y() >> t.z())) throw ParseError(cfg_path.string() + ": malformed translation");
    frame.pose = Pose::from(r, t);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ParseError(cfg_path.string() + ": " + e.what());
  }
  int w = 0, h = 0;
  const auto pfm_path = dir / (stem + ".pfm");
  frame.depth = parse_pfm(read_file(pfm_path), w, h, pfm_path.string());
  if (w != frame.intrinsics.width || h != frame.intrinsics.height) {
    throw DataError(pfm_path.string() + ": raster size does not match its intrinsics record");
  }
  return frame;
}

void save_manifest(const std::filesystem::path& dir, const std::vector<std::string>& stems) {
  std::ostringstream os;
  os << "[frames]\ncount = " << stems.size() << "\n";
  for (std::size_t i = 0; i < stems.size(); ++i) os << "frame_" << i << " = " << stems[i] << "\n";
  write_file_atomic(dir / "manifest.cfg", os.str());
}

std::vector<std::string> load_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.cfg";
  if (!std::filesystem::exists(path)) throw DataError("missing frame manifest " + path.string());
  const auto tree = read_ini_file(path);
  std::vector<std::string> stems;
  try {
    const auto count = tree.get<std::size_t>("frames.count");
    for (std::size_t i = 0; i < count; ++i) stems.push_back(tree.get<std::string>("frames.frame_" + std::to_string(i)));
  } catch (const boost::property_tree::ptree_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return stems;
}

std::vector<DepthFrame> load_frames(const std::filesystem::path& dir, int stride) {
  if (stride < 1) throw ArgumentError("frame stride must be >= 1");
  const auto stems = load_manifest(dir);
  std::vector<DepthFrame> frames;
  for (std::size_t i = 0; i < stems.size(); i += stride) frames.push_back(load_frame(dir, stems[i]));
  return frames;
}

}  // namespace occsurf
