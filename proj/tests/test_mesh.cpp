#include <doctest.h>

#include <functional>
#include <map>

#include "n3map/errors.hpp"
#include "n3map/mesh.hpp"
#include "test_util.hpp"

using namespace n3map;

namespace {

// Single-level map whose decoded field is the trilinear interpolant of `f`
// sampled at the grid vertices.
ImplicitMap field_map(double leaf, const std::vector<Vec3>& support, double radius,
                      const std::function<double(const Vec3&)>& f) {
  MapConfig cfg;
  cfg.leaf_size = leaf;
  cfg.levels = 1;
  ImplicitMap map(cfg, 1);
  map.allocate(support, radius);
  Eigen::VectorXd& p = map.decoder().params();
  p.setZero();
  p[MlpDecoder::kW1] = 1.0;
  p[MlpDecoder::kB1] = 10.0;
  p[MlpDecoder::kW2] = 1.0;
  p[MlpDecoder::kW3] = 1.0;
  p[MlpDecoder::kB3] = -10.0;
  auto& grid = map.grid();
  for (size_t i = 0; i < grid.vertex_keys().size(); ++i) {
    const Vec3 x = morton_decode(grid.vertex_keys()[i].code).cast<double>() * leaf;
    grid.features()[i].setZero();
    grid.features()[i][0] = f(x);
  }
  return map;
}

std::vector<Vec3> sphere_points(double r, int n) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double phi = i * 2.399963229728653;
    const double s = std::sqrt(1 - z * z);
    pts.push_back(r * Vec3(s * std::cos(phi), s * std::sin(phi), z));
  }
  return pts;
}

ImplicitMap unit_sphere_map(double leaf) {
  return field_map(leaf, sphere_points(1.0, 4000), 3 * leaf, [](const Vec3& x) { return x.norm() - 1.0; });
}

}  // namespace

TEST_CASE("sphere mesh vertices lie near the analytic surface") {
  const double h = 0.1;
  const ImplicitMap map = unit_sphere_map(h);
  const TriangleMesh mesh = extract_mesh(map);
  REQUIRE_FALSE(mesh.empty());
  CHECK(mesh.valid());
  CHECK(mesh.has_normals());
  for (const Vec3& v : mesh.vertices) CHECK(std::abs(v.norm() - 1.0) < h);
  // Every vertex sits on a grid edge, where the trilinear field is linear.
  for (const Vec3& v : mesh.vertices) CHECK(std::abs(map.decode_sdf(v)) < 1e-9);
}

TEST_CASE("sphere mesh is closed and outward facing") {
  const TriangleMesh mesh = extract_mesh(unit_sphere_map(0.1));
  std::map<std::pair<uint32_t, uint32_t>, int> edges;
  for (const auto& t : mesh.triangles) {
    const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    const Vec3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    // corners with an exact zero produce zero-area triangles
    if (n.norm() > 1e-12) CHECK(n.dot(c) > 0);
    for (int k = 0; k < 3; ++k) ++edges[{t[k], t[(k + 1) % 3]}];
  }
  // Watertight and consistently oriented: each directed edge has exactly one twin.
  for (const auto& [e, count] : edges) {
    CHECK(count == 1);
    CHECK(edges.contains({e.second, e.first}));
  }
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    CHECK(mesh.normals[i].norm() == doctest::Approx(1.0));
    CHECK(mesh.normals[i].dot(mesh.vertices[i].normalized()) > 0.9);
  }
}

TEST_CASE("all-positive field gives an empty mesh") {
  const ImplicitMap map = field_map(0.2, {Vec3::Zero()}, 1.0, [](const Vec3&) { return 1.0; });
  CHECK(extract_mesh(map).empty());
  const ImplicitMap none(MapConfig{}, 1);
  CHECK(extract_mesh(none).empty());
}

TEST_CASE("symmetric corner values put vertices at edge midpoints") {
  const double v = 0.2;
  const ImplicitMap map = field_map(v, {Vec3(0.1, 0.1, 0.1)}, 0.6, [](const Vec3& x) { return x.z() - 0.1; });
  const TriangleMesh mesh = extract_mesh(map);
  REQUIRE_FALSE(mesh.empty());
  for (const Vec3& p : mesh.vertices) CHECK(p.z() == doctest::Approx(0.1).epsilon(1e-12));
  for (const Vec3& n : mesh.normals) CHECK(n.z() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("finer marching cubes grid than the leaf size") {
  const ImplicitMap map = unit_sphere_map(0.2);
  const TriangleMesh coarse = extract_mesh(map);
  const TriangleMesh fine = extract_mesh(map, 0.05);
  CHECK(fine.triangles.size() > 4 * coarse.triangles.size());
  for (const Vec3& v : fine.vertices) CHECK(std::abs(v.norm() - 1.0) < 0.2);
}

TEST_CASE("extraction is deterministic") {
  const ImplicitMap map = unit_sphere_map(0.1);
  const TriangleMesh a = extract_mesh(map), b = extract_mesh(map);
  CHECK(a.vertices == b.vertices);
  CHECK(a.triangles == b.triangles);
  CHECK(a.normals == b.normals);
}

TEST_CASE("culling keeps triangles near the reference") {
  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(10, 0, 0), Vec3(11, 0, 0), Vec3(10, 1, 0)};
  mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
  const std::vector<Vec3> ref{Vec3(10.3, 0.3, 0)};
  const TriangleMesh out = cull_unobserved(mesh, ref, 0.5);
  REQUIRE(out.triangles.size() == 1);
  CHECK(out.vertices.size() == 3);
  CHECK(out.vertices[out.triangles[0][0]] == Vec3(10, 0, 0));
  CHECK(out.valid());
  CHECK(cull_unobserved(mesh, ref, 0.01).empty());
  CHECK(cull_unobserved(mesh, {}, 5.0).empty());
  CHECK(cull_unobserved(mesh, {Vec3(5, 0, 0)}, 100.0).triangles.size() == 2);
}

TEST_CASE("mesh PLY round trip") {
  const TriangleMesh mesh = extract_mesh(unit_sphere_map(0.2));
  testutil::TempDir dir;
  write_mesh_ply(dir / "m.ply", mesh);
  const TriangleMesh back = read_mesh_ply(dir / "m.ply");
  CHECK(back.vertices == mesh.vertices);
  CHECK(back.triangles == mesh.triangles);
  CHECK(back.normals == mesh.normals);

  write_mesh_ply(dir / "empty.ply", TriangleMesh{});
  const TriangleMesh empty = read_mesh_ply(dir / "empty.ply");
  CHECK(empty.vertices.empty());
  CHECK(empty.triangles.empty());
}

TEST_CASE("mesh PLY errors") {
  testutil::TempDir dir;
  const std::string head =
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n";
  testutil::write_file(dir / "quad.ply", head + "4 0 1 2 3\n");
  CHECK_THROWS_AS(read_mesh_ply(dir / "quad.ply"), FormatError);
  testutil::write_file(dir / "range.ply", head + "3 0 1 7\n");
  CHECK_THROWS_AS(read_mesh_ply(dir / "range.ply"), FormatError);
  testutil::write_file(dir / "ok.ply", head + "3 0 1 2\n");
  CHECK(read_mesh_ply(dir / "ok.ply").triangles.size() == 1);
  CHECK_THROWS_AS(read_mesh_ply(dir / "missing.ply"), FormatError);
}
