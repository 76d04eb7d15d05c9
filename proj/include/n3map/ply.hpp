#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Minimal PLY container shared by point-cloud and mesh I/O. Reads ASCII and
// binary-little-endian files; always writes binary-little-endian.
namespace n3map::ply {

enum class Type : uint8_t { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

struct Property {
  std::string name;
  Type type = Type::kFloat32;
  bool is_list = false;
  Type count_type = Type::kUInt8;
  std::vector<double> scalars;              // one per element when !is_list
  std::vector<std::vector<int64_t>> lists;  // one per element when is_list
};

struct Element {
  std::string name;
  size_t count = 0;
  std::vector<Property> properties;

  [[nodiscard]] const Property* find(const std::string& prop) const;
};

struct File {
  std::vector<Element> elements;

  [[nodiscard]] const Element* find(const std::string& element) const;
};

// Throws FormatError on malformed header or truncated body.
File read(const std::filesystem::path& path);
File parse(const std::string& bytes);

void write(const std::filesystem::path& path, const File& file);

}  // namespace n3map::ply
