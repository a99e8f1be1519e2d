#include "occsurf/mesh_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "occsurf/binary_io.hpp"
#include "occsurf/error.hpp"

namespace occsurf {

namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

}  // namespace

TriangleMesh parse_obj(const std::string& text, const std::string& source) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0, face_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    auto fail = [&](const std::string& msg) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("malformed vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const std::string head = tok.substr(0, slash);
        long value = 0;
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) fail("malformed face index '" + tok + "'");
        const long n = static_cast<long>(mesh.vertices.size());
        const long resolved = value > 0 ? value - 1 : n + value;
        if (resolved < 0 || resolved >= n) {
          fail("face " + std::to_string(face_no) + " references vertex " + std::to_string(value) + " but only " +
               std::to_string(n) + " vertices are defined");
        }
        idx.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (idx.size() < 3) fail("face " + std::to_string(face_no) + " has fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
      ++face_no;
    }
    // vn, vt, o, g, s, usemtl, mtllib: ignored.
  }
  return mesh;
}

std::string format_obj(const TriangleMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 60 + mesh.triangles.size() * 30);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out += buf;
  }
  return out;
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or item type for lists
  std::string count_type;  // non-empty for list properties
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::size_t type_size(const std::string& t, const std::string& source) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw ParseError(source + ": unknown PLY type '" + t + "'");
}

double read_binary_scalar(const std::string& bytes, std::size_t& off, const std::string& t, const std::string& source) {
  const std::size_t n = type_size(t, source);
  if (off + n > bytes.size()) throw ParseError(source + ": unexpected end of data at byte " + std::to_string(off));
  const char* p = bytes.data() + off;
  off += n;
  auto get = [&](auto v) {
    std::memcpy(&v, p, sizeof v);
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return get(std::int8_t{});
  if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
  if (t == "short" || t == "int16") return get(std::int16_t{});
  if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
  if (t == "int" || t == "int32") return get(std::int32_t{});
  if (t == "uint" || t == "uint32") return get(std::uint32_t{});
  if (t == "float" || t == "float32") return get(float{});
  return get(double{});
}

}  // namespace

TriangleMesh parse_ply(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&]() {
    const auto end = bytes.find('\n', pos);
    if (end == std::string::npos) throw ParseError(source + ": truncated PLY header");
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    return line;
  };
  if (next_line() != "ply") throw ParseError(source + ":1: missing 'ply' magic");
  std::string format;
  std::vector<PlyElement> elements;
  for (;;) {
    const std::string line = next_line();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto fail = [&](const std::string& msg) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info" || key.empty()) continue;
    if (key == "format") {
      ls >> format;
      if (format != "binary_little_endian" && format != "ascii") fail("unsupported PLY format '" + format + "'");
    } else if (key == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) fail("malformed element line");
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) fail("property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      if (p.name.empty()) fail("malformed property line");
      type_size(p.type, source);
      elements.back().props.push_back(p);
    } else {
      fail("unexpected header keyword '" + key + "'");
    }
  }
  if (format.empty()) throw ParseError(source + ": PLY header lacks a format line");
  for (const auto& e : elements) {
    if (e.name != "vertex") continue;
    for (const char* axis : {"x", "y", "z"}) {
      const bool found = std::any_of(e.props.begin(), e.props.end(), [&](const PlyProperty& p) { return p.name == axis; });
      if (!found) throw ParseError(source + ": PLY vertex element lacks property '" + axis + "'");
    }
  }

  TriangleMesh mesh;
  const bool ascii = format == "ascii";
  std::istringstream text(ascii ? bytes.substr(pos) : std::string());
  std::size_t body_line = line_no;
  auto read_scalar = [&](const std::string& t) -> double {
    if (!ascii) return read_binary_scalar(bytes, pos, t, source);
    double v;
    if (!(text >> v)) throw ParseError(source + ": malformed ASCII PLY body after header line " + std::to_string(body_line));
    return v;
  };
  for (const auto& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    for (std::size_t i = 0; i < e.count; ++i) {
      Vec3 v = Vec3::Zero();
      std::vector<std::uint32_t> idx;
      for (const auto& p : e.props) {
        if (!p.count_type.empty()) {
          const auto n = static_cast<std::size_t>(read_scalar(p.count_type));
          for (std::size_t k = 0; k < n; ++k) {
            const double value = read_scalar(p.type);
            if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
              if (value < 0) throw ParseError(source + ": face " + std::to_string(i) + " has a negative index");
              idx.push_back(static_cast<std::uint32_t>(value));
            }
          }
        } else {
          const double value = read_scalar(p.type);
          if (is_vertex) {
            if (p.name == "x") v.x() = value;
            if (p.name == "y") v.y() = value;
            if (p.name == "z") v.z() = value;
          }
        }
      }
      if (is_vertex) mesh.vertices.push_back(v);
      if (is_face) {
        if (idx.size() < 3) throw ParseError(source + ": face " + std::to_string(i) + " has fewer than 3 vertices");
        for (auto k : idx) {
          if (k >= mesh.vertices.size()) {
            throw ParseError(source + ": face " + std::to_string(i) + " references vertex " + std::to_string(k) +
                             " but only " + std::to_string(mesh.vertices.size()) + " vertices are defined");
          }
        }
        for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
      }
      ++body_line;
    }
  }
  return mesh;
}

std::string format_ply(const TriangleMesh& mesh) {
  std::ostringstream os(std::ios::binary);
  os << "ply\nformat binary_little_endian 1.0\ncomment occsurf\n"
     << "element vertex " << mesh.vertices.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "element face " << mesh.triangles.size() << "\n"
     << "property list uchar uint vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    write_le(os, static_cast<float>(v.x()));
    write_le(os, static_cast<float>(v.y()));
    write_le(os, static_cast<float>(v.z()));
  }
  for (const auto& t : mesh.triangles) {
    write_le(os, std::uint8_t{3});
    for (auto i : t) write_le(os, i);
  }
  return os.str();
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  const std::string bytes = read_file(path);
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = parse_obj(bytes, path.string());
  } else if (ext == ".ply") {
    mesh = parse_ply(bytes, path.string());
  } else {
    throw ArgumentError("unsupported mesh extension '" + ext + "' (expected .obj or .ply)");
  }
  return mesh;
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".obj") {
    write_file_atomic(path, format_obj(mesh));
  } else if (ext == ".ply") {
    write_file_atomic(path, format_ply(mesh));
  } else {
    throw ArgumentError("unsupported mesh extension '" + ext + "' (expected .obj or .ply)");
  }
}

}  // namespace occsurf
