#pragma once

#include <filesystem>

#include "occsurf/geom.hpp"

namespace occsurf {

// Format chosen by extension: .obj (ASCII, 1-based) or .ply (binary
// little-endian on write; binary little-endian or ASCII on read).
// Malformed input throws ParseError with a line number or byte offset.
TriangleMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

TriangleMesh parse_obj(const std::string& text, const std::string& source = "<obj>");
std::string format_obj(const TriangleMesh& mesh);
TriangleMesh parse_ply(const std::string& bytes, const std::string& source = "<ply>");
std::string format_ply(const TriangleMesh& mesh);

}  // namespace occsurf
