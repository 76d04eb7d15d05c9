#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "n3map/implicit_map.hpp"
#include "n3map/types.hpp"

namespace n3map {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> triangles;
  std::vector<Vec3> normals;  // empty or one per vertex

  [[nodiscard]] bool empty() const { return triangles.empty(); }
  [[nodiscard]] bool has_normals() const { return !normals.empty(); }
  // Indices in range, finite vertices, normals sized to match.
  [[nodiscard]] bool valid() const;
};

// Marching cubes at isolevel 0 on the grid {i * mc_voxel}. Only cubes whose
// eight corners lie in allocated leaves are polygonized; vertices on shared
// grid edges are welded. mc_voxel <= 0 selects the leaf size.
TriangleMesh extract_mesh(const ImplicitMap& map, double mc_voxel = 0.0);

// Removes triangles whose centroid is farther than `radius` from every
// reference point, then drops unreferenced vertices.
TriangleMesh cull_unobserved(const TriangleMesh& mesh, const std::vector<Vec3>& reference, double radius);

// Binary little-endian PLY: double x y z [nx ny nz], face list uchar/int.
void write_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_mesh_ply(const std::filesystem::path& path);

}  // namespace n3map
