#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "occsurf/error.hpp"

namespace occsurf {

// Little-endian scalar read/write. The toolkit only targets little-endian
// hosts; the static_assert below keeps that assumption explicit.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what = "value") {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ParseError(std::string("unexpected end of file while reading ") + what + " at offset " +
                     std::to_string(static_cast<long long>(is.gcount())));
  }
  return value;
}

void expect_magic(std::istream& is, const char (&magic)[5], const std::string& path);
void write_magic(std::ostream& os, const char (&magic)[5]);

// Writes via a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace occsurf
