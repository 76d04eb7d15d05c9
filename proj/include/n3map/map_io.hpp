#pragma once

#include <filesystem>
#include <string>

#include "n3map/implicit_map.hpp"

// Map container: "N3MAP\0", a version byte, then tagged sections
// (4-byte tag, u64 little-endian payload length, payload):
//   CONF  leaf size, levels, feature width, hidden width, FD step, frozen flag
//   PROV  free text (key = value run parameters)
//   LEAF  allocated leaf voxels in allocation order (3 x i32 each)
//   VERT  vertex features in index order (u64 Morton code, u8 level, 8 x f64)
//   MLPW  decoder parameters (f64)
namespace n3map {

inline constexpr unsigned char kMapFormatVersion = 1;

void save_map(const std::filesystem::path& path, const ImplicitMap& map, const std::string& provenance = {});
// Throws FormatError on bad magic, version mismatch, or truncation.
ImplicitMap load_map(const std::filesystem::path& path, std::string* provenance = nullptr);

}  // namespace n3map
