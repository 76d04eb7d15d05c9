#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "n3map/kdtree.hpp"
#include "n3map/normals.hpp"
#include "n3map/scene.hpp"

using namespace n3map;

namespace {

std::vector<Vec3> random_points(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Vec3> pts;
  for (size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("kd-tree with one point") {
  const KdTree tree({Vec3(1, 2, 3)});
  const auto nn = tree.knn(Vec3::Zero(), 5);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].index == 0);
  CHECK(nn[0].dist2 == doctest::Approx(14.0));
}

TEST_CASE("kd-tree rejects an empty point set") { CHECK_THROWS_AS(KdTree(std::vector<Vec3>{}), std::invalid_argument); }

TEST_CASE("kd-tree knn equals brute force") {
  const auto pts = random_points(1000, 1);
  const KdTree tree(pts);
  const auto queries = random_points(100, 2);
  for (const Vec3& q : queries) {
    std::vector<std::pair<double, uint32_t>> all;
    for (uint32_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - q).squaredNorm(), i);
    std::sort(all.begin(), all.end());
    const auto nn = tree.knn(q, 20);
    REQUIRE(nn.size() == 20);
    for (size_t k = 0; k < 20; ++k) {
      CHECK(nn[k].index == all[k].second);
      CHECK(nn[k].dist2 == all[k].first);
    }
    CHECK(tree.nearest(q).index == all[0].second);
  }
}

TEST_CASE("kd-tree keeps duplicate points") {
  const KdTree tree({Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(5, 5, 5)});
  const auto nn = tree.knn(Vec3(1, 1, 1), 3);
  REQUIRE(nn.size() == 3);
  std::vector<uint32_t> idx{nn[0].index, nn[1].index, nn[2].index};
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<uint32_t>{0, 1, 2});
  CHECK(nn[2].dist2 == 0.0);
}

TEST_CASE("symmetric eigen decomposition") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    Mat3 a;
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = u(rng);
    const Mat3 m = a * a.transpose();
    const SymmetricEigen3 e = symmetric_eigen3(m);
    CHECK(e.values[0] <= e.values[1]);
    CHECK(e.values[1] <= e.values[2]);
    for (int k = 0; k < 3; ++k) {
      CHECK((m * e.vectors[k] - e.values[k] * e.vectors[k]).norm() < 1e-10);
      CHECK(e.vectors[k].norm() == doctest::Approx(1.0));
    }
  }
  const SymmetricEigen3 id = symmetric_eigen3(Mat3::Identity());
  CHECK(id.values[0] == 1.0);
}

TEST_CASE("plane points give vertical normals") {
  ScanFrame f;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) f.points.emplace_back(i * 0.1, j * 0.13, 0.0);
  f.sensor_origin = Vec3(0.5, 0.5, 2.0);
  const ScanFrame g = estimate_normals(f, 20);
  for (size_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(std::abs(g.normals[i].z()) - 1.0) < 1e-9);
    CHECK(g.normals[i].z() > 0);  // oriented toward the sensor above
  }
}

TEST_CASE("sphere scan normals match the analytic gradient") {
  // About 1000 points per steradian on the visible cap.
  SceneSpec s;
  s.primitives = {Primitive::sphere(Vec3::Zero(), 5.0)};
  const Vec3 origin(12, 0, 0);
  const ScanFrame scan = synth_scan(s, origin, cone_directions(Vec3(-1, 0, 0), std::asin(5.0 / 12.0), 60000));
  ScanFrame bare = scan;
  bare.normals.clear();
  bare.normal_flags.clear();
  NormalStats stats;
  const ScanFrame est = estimate_normals(bare, 20, &stats);
  std::vector<double> err;
  double worst_interior = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    const double e = angle_deg(est.normals[i], scan.normals[i]);
    err.push_back(e);
    // Skip the silhouette rim where the neighbourhood is one-sided.
    if (angle_deg(scan.normals[i], origin - scan.points[i]) < 60) worst_interior = std::max(worst_interior, e);
  }
  std::sort(err.begin(), err.end());
  CHECK(err[err.size() / 2] < 1.0);
  CHECK(worst_interior < 2.0);
}

TEST_CASE("degenerate neighbourhoods are flagged invalid") {
  ScanFrame f;
  f.points = {Vec3(1, 1, 1), Vec3(1, 1, 1)};
  NormalStats stats;
  const ScanFrame g = estimate_normals(f, 20, &stats);
  CHECK(g.normal_flags[0] == NormalFlag::kInvalid);
  CHECK(g.normal_flags[1] == NormalFlag::kInvalid);
  CHECK(stats.invalid == 2);

  ScanFrame line;
  for (int i = 0; i < 10; ++i) line.points.emplace_back(i, 0, 0);
  const ScanFrame h = estimate_normals(line, 5);
  for (auto flag : h.normal_flags) CHECK(flag == NormalFlag::kInvalid);
}

TEST_CASE("orientation examples") {
  ScanFrame f;
  f.points = {Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  f.normals = {Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)};
  f.sensor_origin = Vec3(3, 0, 0);
  NormalStats stats;
  const ScanFrame g = orient_normals(f, &stats);
  CHECK(g.normals[0] == Vec3(1, 0, 0));
  CHECK(g.normals[1] == Vec3(1, 0, 0));
  // (3,0,0) - (0,1,0) = (3,-1,0) is not perpendicular to (1,0,0): flipped only if negative.
  CHECK(g.normals[2] == Vec3(1, 0, 0));
  CHECK(stats.low_confidence == 0);

  ScanFrame grazing;
  grazing.points = {Vec3(0, 0, 0)};
  grazing.normals = {Vec3(0, 1, 0)};
  grazing.sensor_origin = Vec3(5, 0, 0);
  const ScanFrame h = orient_normals(grazing, &stats);
  CHECK(h.normals[0] == Vec3(0, 1, 0));
  CHECK(h.normal_flags[0] == NormalFlag::kLowConfidence);
  CHECK(stats.low_confidence == 1);
}

TEST_CASE("normal estimation is permutation invariant up to orientation") {
  SceneSpec s;
  s.primitives = {Primitive::sphere(Vec3::Zero(), 2.0)};
  const Vec3 origin(6, 0, 0);
  ScanFrame scan = synth_scan(s, origin, cone_directions(Vec3(-1, 0, 0), 0.3, 800));
  scan.normals.clear();
  scan.normal_flags.clear();
  ScanFrame shuffled = scan;
  std::vector<size_t> perm(scan.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::mt19937_64 rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (size_t i = 0; i < perm.size(); ++i) shuffled.points[i] = scan.points[perm[i]];
  const ScanFrame a = estimate_normals(scan, 20);
  const ScanFrame b = estimate_normals(shuffled, 20);
  for (size_t i = 0; i < perm.size(); ++i) CHECK(angle_deg(a.normals[perm[i]], b.normals[i]) < 1e-4);
}

TEST_CASE("estimated normals are unit length and sensor facing") {
  SceneSpec s;
  s.primitives = {Primitive::sine_ground(0, 0.3, 6.0)};
  s.pattern = RayPattern::kLidar;
  s.rays_per_scan = 3000;
  s.max_range = 20;
  const Vec3 origin(0, 0, 2);
  ScanFrame scan = synth_scan(s, origin, scan_directions(s, origin));
  scan.normals.clear();
  scan.normal_flags.clear();
  const ScanFrame e = estimate_normals(scan, 20);
  for (size_t i = 0; i < e.size(); ++i) {
    if (e.normal_flags[i] != NormalFlag::kValid) continue;
    CHECK(std::abs(e.normals[i].norm() - 1.0) < 1e-6);
    CHECK(e.normals[i].dot(origin - e.points[i]) > 0);
  }
}
