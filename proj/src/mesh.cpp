#include "n3map/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "mc_tables.hpp"
#include "n3map/errors.hpp"
#include "n3map/kdtree.hpp"
#include "n3map/morton.hpp"
#include "n3map/ply.hpp"

namespace n3map {

bool TriangleMesh::valid() const {
  if (!normals.empty() && normals.size() != vertices.size()) return false;
  for (const auto& v : vertices)
    if (!v.allFinite()) return false;
  for (const auto& t : triangles)
    for (uint32_t i : t)
      if (i >= vertices.size()) return false;
  return true;
}

namespace {

// Corner offsets and edge endpoints in Bourke's numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                              {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

uint64_t grid_key(const Vec3i& g) { return morton_encode_unchecked(g.x(), g.y(), g.z()); }

struct VecLess {
  bool operator()(const Vec3i& a, const Vec3i& b) const {
    if (a.z() != b.z()) return a.z() < b.z();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.x() < b.x();
  }
};

}  // namespace

TriangleMesh extract_mesh(const ImplicitMap& map, double mc_voxel) {
  const FeatureGrid& grid = map.grid();
  const double v = grid.leaf_size();
  const double h = mc_voxel > 0 ? mc_voxel : v;
  TriangleMesh mesh;
  if (grid.leaf_count() == 0) return mesh;

  // Cubes whose minimum corner falls inside an allocated leaf.
  std::vector<Vec3i> cubes;
  for (const Vec3i& leaf : grid.leaves()) {
    Vec3i lo, hi;
    for (int a = 0; a < 3; ++a) {
      lo[a] = static_cast<int64_t>(std::ceil(static_cast<double>(leaf[a]) * v / h - 1e-9));
      hi[a] = static_cast<int64_t>(std::ceil(static_cast<double>(leaf[a] + 1) * v / h - 1e-9));
    }
    for (int64_t z = lo.z(); z < hi.z(); ++z)
      for (int64_t y = lo.y(); y < hi.y(); ++y)
        for (int64_t x = lo.x(); x < hi.x(); ++x) cubes.emplace_back(x, y, z);
  }
  std::sort(cubes.begin(), cubes.end(), VecLess{});
  cubes.erase(std::unique(cubes.begin(), cubes.end()), cubes.end());

  std::unordered_map<uint64_t, std::optional<double>> values;
  auto value_at = [&](const Vec3i& g) -> std::optional<double> {
    auto [it, inserted] = values.try_emplace(grid_key(g));
    if (inserted) it->second = map.try_decode(g.cast<double>() * h);
    return it->second;
  };

  std::array<std::unordered_map<uint64_t, uint32_t>, 3> edge_vertex;  // per axis: grid key -> vertex
  auto vertex_on_edge = [&](const Vec3i& a, double sa, const Vec3i& b, double sb) -> uint32_t {
    int axis = 0;
    while (a[axis] == b[axis]) ++axis;
    auto [it, inserted] = edge_vertex[axis].try_emplace(grid_key(a), static_cast<uint32_t>(mesh.vertices.size()));
    if (inserted) {
      const double t = sa / (sa - sb);
      mesh.vertices.push_back((a.cast<double>() + t * (b - a).cast<double>()) * h);
    }
    return it->second;
  };

  std::array<double, 8> s{};
  std::array<Vec3i, 8> corner;
  std::array<uint32_t, 12> edge_ids{};
  for (const Vec3i& c : cubes) {
    bool complete = true;
    int index = 0;
    for (int k = 0; k < 8 && complete; ++k) {
      corner[k] = c + Vec3i(kCorner[k][0], kCorner[k][1], kCorner[k][2]);
      const auto val = value_at(corner[k]);
      if (!val) {
        complete = false;
        break;
      }
      s[k] = *val;
      if (s[k] < 0.0) index |= 1 << k;
    }
    if (!complete) continue;
    const int edges = mc::kEdgeTable[index];
    if (edges == 0) continue;
    for (int e = 0; e < 12; ++e) {
      if (!(edges & (1 << e))) continue;
      const int a = kEdge[e][0], b = kEdge[e][1];
      edge_ids[e] = vertex_on_edge(corner[a], s[a], corner[b], s[b]);
    }
    for (const int* t = mc::kTriTable[index]; *t != -1; t += 3) {
      // Reversed so faces wind counter-clockwise seen from positive SDF.
      const std::array<uint32_t, 3> tri{edge_ids[t[0]], edge_ids[t[2]], edge_ids[t[1]]};
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
      mesh.triangles.push_back(tri);
    }
  }

  mesh.normals.resize(mesh.vertices.size());
  std::vector<Vec3> face_sum(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (uint32_t i : t) face_sum[i] += n;
  }
  const double fd = map.config().gradient_step();
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    Vec3 g;
    if (!map.try_gradient(mesh.vertices[i], fd, g) || !(g.norm() > 0)) g = face_sum[i];
    const double len = g.norm();
    mesh.normals[i] = len > 0 ? Vec3(g / len) : Vec3::UnitZ();
  }
  return mesh;
}

TriangleMesh cull_unobserved(const TriangleMesh& mesh, const std::vector<Vec3>& reference, double radius) {
  if (mesh.triangles.empty() || reference.empty()) return reference.empty() ? TriangleMesh{} : mesh;
  const KdTree tree(reference);
  const double r2 = radius * radius;
  TriangleMesh out;
  std::vector<int64_t> remap(mesh.vertices.size(), -1);
  for (const auto& t : mesh.triangles) {
    const Vec3 centroid = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    if (tree.nearest(centroid).dist2 > r2) continue;
    std::array<uint32_t, 3> nt{};
    for (int k = 0; k < 3; ++k) {
      if (remap[t[k]] < 0) {
        remap[t[k]] = static_cast<int64_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[t[k]]);
        if (mesh.has_normals()) out.normals.push_back(mesh.normals[t[k]]);
      }
      nt[k] = static_cast<uint32_t>(remap[t[k]]);
    }
    out.triangles.push_back(nt);
  }
  return out;
}

void write_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  ply::Element vertex;
  vertex.name = "vertex";
  vertex.count = mesh.vertices.size();
  const char* names[] = {"x", "y", "z", "nx", "ny", "nz"};
  const int props = mesh.has_normals() ? 6 : 3;
  for (int k = 0; k < props; ++k) {
    ply::Property p;
    p.name = names[k];
    p.type = ply::Type::kFloat64;
    p.scalars.reserve(vertex.count);
    vertex.properties.push_back(std::move(p));
  }
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) vertex.properties[k].scalars.push_back(mesh.vertices[i][k]);
    if (props == 6)
      for (int k = 0; k < 3; ++k) vertex.properties[3 + k].scalars.push_back(mesh.normals[i][k]);
  }

  ply::Element face;
  face.name = "face";
  face.count = mesh.triangles.size();
  ply::Property idx;
  idx.name = "vertex_indices";
  idx.type = ply::Type::kInt32;
  idx.is_list = true;
  idx.count_type = ply::Type::kUInt8;
  idx.lists.reserve(face.count);
  for (const auto& t : mesh.triangles) idx.lists.push_back({t[0], t[1], t[2]});
  face.properties.push_back(std::move(idx));

  ply::File file;
  file.elements.push_back(std::move(vertex));
  file.elements.push_back(std::move(face));
  ply::write(path, file);
}

TriangleMesh read_mesh_ply(const std::filesystem::path& path) {
  const ply::File file = ply::read(path);
  const ply::Element* vertex = file.find("vertex");
  if (!vertex) throw FormatError("mesh: " + path.string() + " has no vertex element");
  const ply::Property* p[6] = {vertex->find("x"), vertex->find("y"), vertex->find("z"),
                               vertex->find("nx"), vertex->find("ny"), vertex->find("nz")};
  for (int k = 0; k < 3; ++k)
    if (!p[k] || p[k]->is_list) throw FormatError("mesh: " + path.string() + " lacks scalar x/y/z");
  const bool with_normals = p[3] && p[4] && p[5] && !p[3]->is_list && !p[4]->is_list && !p[5]->is_list;

  TriangleMesh mesh;
  mesh.vertices.reserve(vertex->count);
  for (size_t i = 0; i < vertex->count; ++i) {
    mesh.vertices.emplace_back(p[0]->scalars[i], p[1]->scalars[i], p[2]->scalars[i]);
    if (!mesh.vertices.back().allFinite()) throw FormatError("mesh: non-finite vertex in " + path.string());
    if (with_normals) mesh.normals.emplace_back(p[3]->scalars[i], p[4]->scalars[i], p[5]->scalars[i]);
  }

  if (const ply::Element* face = file.find("face")) {
    const ply::Property* idx = face->find("vertex_indices");
    if (!idx) idx = face->find("vertex_index");
    if (!idx || !idx->is_list) throw FormatError("mesh: " + path.string() + " face element lacks an index list");
    mesh.triangles.reserve(face->count);
    for (size_t f = 0; f < face->count; ++f) {
      const auto& l = idx->lists[f];
      if (l.size() != 3)
        throw FormatError("mesh: face " + std::to_string(f) + " has " + std::to_string(l.size()) + " vertices");
      std::array<uint32_t, 3> t{};
      for (int k = 0; k < 3; ++k) {
        if (l[k] < 0 || static_cast<size_t>(l[k]) >= mesh.vertices.size())
          throw FormatError("mesh: face " + std::to_string(f) + " index out of range");
        t[k] = static_cast<uint32_t>(l[k]);
      }
      mesh.triangles.push_back(t);
    }
  }
  return mesh;
}

}  // namespace n3map
