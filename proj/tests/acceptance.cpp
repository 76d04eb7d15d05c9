// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "n3map/config.hpp"
#include "n3map/eval.hpp"
#include "n3map/kdtree.hpp"
#include "n3map/map_io.hpp"
#include "n3map/mapper.hpp"
#include "n3map/mesh.hpp"
#include "n3map/pipeline.hpp"
#include "n3map/scene.hpp"

using namespace n3map;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<ScanFrame> world_frames(const SceneSpec& scene, uint64_t seed) {
  return synth_frames(scene, seed, scene.range_noise_sigma).frames;
}

MapperConfig sphere_mapper(double leaf, double sigma, uint64_t seed) {
  MapperConfig m;
  m.map.leaf_size = leaf;
  m.sampler.sigma = sigma;
  m.sampler.tr = 3 * sigma;
  m.loss.tr = 3 * sigma;
  m.train.iters = 40;
  m.seed = seed;
  return m;
}

// 1. Label accuracy ordering on the noise-free R=5 sphere.
Outcome label_accuracy() {
  SynthConfig sc;
  sc.scene = "sphere";
  sc.frames = 4;
  sc.rays = 20000;
  const SceneSpec scene = make_scene(sc);
  const auto frames = world_frames(scene, 42);
  const SamplerConfig sampler;
  const auto rows = label_audit(scene, frames, sampler,
                                {LabelStrategy::kNormalGuided, LabelStrategy::kCorrected, LabelStrategy::kProjective},
                                42, 60.0);
  const double ng = rows[0].rmse_m, co = rows[1].rmse_m, pr = rows[2].rmse_m;
  const size_t rays = static_cast<size_t>(sc.frames) * static_cast<size_t>(sc.rays);
  const bool ok = rays >= 50000 && rows[0].n_pairs > 0 && ng <= 1e-5 && ng < co && co < pr && pr >= 4 * co;
  return {ok, fmt("rays=%zu pairs(>60deg)=%zu rmse normal_guided=%.3g corrected=%.4g projective=%.4g ratio=%.2f",
                  rays, rows[0].n_pairs, ng, co, pr, pr / co)};
}

// 2. Analytic gradients against central differences.
Outcome gradient_check() {
  MapConfig mc;
  ImplicitMap map(mc, 7);
  const std::vector<Vec3> anchors{Vec3(0, 0, 0), Vec3(0.7, -0.3, 0.2)};
  map.allocate(anchors, 0.6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> f(-0.3, 0.3), q(-0.35, 0.35);
  for (auto& feat : map.grid().features())
    for (int k = 0; k < kFeatureDim; ++k) feat[k] = f(rng);
  std::vector<TrainingPair> batch;
  while (batch.size() < 16) {
    TrainingPair p;
    p.query = anchors[batch.size() % 2] + Vec3(q(rng), q(rng), q(rng));
    if (!map.grid().contains(p.query)) continue;
    p.kind = batch.size() % 4 == 3 ? PairKind::kFreeSpace : PairKind::kNearSurface;
    p.sdf_label = p.kind == PairKind::kFreeSpace ? 0.3 : f(rng);
    batch.push_back(p);
  }
  LossConfig lc;
  lc.lambda_e = 0.5;
  Gradients g;
  map.forward_backward(batch, lc, &g);
  // Central differences on a loss near 1 carry about 1e-16 / eps of roundoff, so
  // gradients below 1e-5 are compared with that absolute floor.
  const double eps = 1e-6, floor = 1e-5;
  size_t checked = 0;
  double worst = 0;
  auto probe = [&](double& w, double analytic) {
    const double keep = w;
    w = keep + eps;
    const double up = total_loss(batch, map, lc).total;
    w = keep - eps;
    const double down = total_loss(batch, map, lc).total;
    w = keep;
    const double fd = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), floor}));
    ++checked;
  };
  Eigen::VectorXd& params = map.decoder().params();
  for (Eigen::Index i = 0; i < params.size(); ++i) probe(params[i], g.decoder[i]);
  for (uint32_t idx : g.touched)
    for (int k = 0; k < kFeatureDim; ++k) probe(map.grid().features()[idx][k], g.features[idx][k]);
  return {worst < 1e-4, fmt("parameters=%zu max_rel_err=%.3g", checked, worst)};
}

// 3. Trained sphere SDF against the analytic one inside the truncation band.
Outcome sdf_fidelity() {
  SynthConfig sc;
  sc.scene = "sphere";
  const SceneSpec scene = make_scene(sc);
  const auto frames = world_frames(scene, 42);
  const double sigma = 0.05, tr = 3 * sigma;
  Mapper mapper(sphere_mapper(0.2, sigma, 42));
  run_mapping(mapper, frames);
  const auto points = gather_points(frames);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<size_t> pick(0, points.size() - 1);
  std::uniform_real_distribution<double> band(-tr, tr);
  double abs_err = 0;
  size_t n = 0, unit = 0;
  while (n < 10000) {
    const Vec3& p = points[pick(rng)];
    const Vec3 x = p + band(rng) * oracle_gradient(scene, p);
    const auto d = mapper.map().try_decode(x);
    Vec3 grad;
    if (!d || !mapper.map().try_gradient(x, mapper.map().config().gradient_step(), grad)) continue;
    abs_err += std::abs(*d - oracle_sdf(scene, x));
    const double gn = grad.norm();
    unit += gn >= 0.7 && gn <= 1.3;
    ++n;
  }
  const double mae = abs_err / static_cast<double>(n);
  const double frac = static_cast<double>(unit) / static_cast<double>(n);
  return {mae < sigma && frac >= 0.9, fmt("mae=%.4f m (sigma %.2f) unit_gradient_fraction=%.3f", mae, sigma, frac)};
}

// 4. Culled mesh of a scaled sphere against analytic surface samples.
Outcome mesh_quality() {
  const double v = 0.05, radius = 1.0;
  SceneSpec scene;
  scene.primitives.push_back(Primitive::sphere(Vec3::Zero(), radius));
  scene.trajectory = orbit_trajectory(Vec3::Zero(), 2.4, 0.0, 20);
  scene.pattern = RayPattern::kTarget;
  scene.rays_per_scan = 20000;
  const auto frames = world_frames(scene, 42);
  Mapper mapper(sphere_mapper(v, 0.05, 42));
  run_mapping(mapper, frames);
  const auto observed = gather_points(frames);
  const TriangleMesh mesh = cull_unobserved(extract_mesh(mapper.map(), v), observed, 2 * v);
  if (mesh.empty()) return {false, "empty mesh"};
  // Analytic samples restricted to the part of the sphere the sensor saw.
  const KdTree tree(observed);
  std::vector<Vec3> gt;
  for (const Vec3& d : fibonacci_sphere(200000)) {
    const Vec3 p = radius * d;
    if (tree.nearest(p).dist2 <= 4 * v * v) gt.push_back(p);
  }
  const MetricsReport r = compute_metrics(sample_mesh_surface(mesh, 200000, 42), gt, 2 * v);
  return {r.chamfer_l1_cm < 100 * v && r.fscore_pct > 95.0,
          fmt("chamfer_l1=%.3f cm (limit %.1f) fscore@%.0fcm=%.2f%% gt=%zu", r.chamfer_l1_cm, 100 * v, 200 * v,
              r.fscore_pct, gt.size())};
}

// 5. Ablation ordering on the two-pass ground and sphere scene.
Outcome ablation_ordering() {
  bool ok = true;
  std::string detail;
  for (uint64_t seed : {42, 43, 44}) {
    RunConfig cfg;
    cfg.synth.scene = "ground_sphere";
    cfg.mapper.seed = seed;
    cfg.eval.n_samples = 100000;
    const auto res = run_ablation(cfg, {5, 4, 3, 7});
    const double full = res[0].metrics.fscore_pct, proj = res[1].metrics.fscore_pct;
    const double vox = res[2].metrics.fscore_pct, kf = res[3].metrics.fscore_pct;
    ok = ok && full >= proj && vox >= kf;
    detail += fmt("seed %llu: full=%.2f projective=%.2f voxel=%.2f keyframe=%.2f; ",
                  static_cast<unsigned long long>(seed), full, proj, vox, kf);
  }
  return {ok, detail};
}

// 6. Stored pairs stay bounded along a long corridor; replay keeps growing.
Outcome bounded_memory() {
  RunConfig cfg;
  cfg.synth.scene = "corridor";
  cfg.synth.frames = 200;
  cfg.synth.rays = 2000;
  const SceneSpec scene = make_scene(cfg.synth);
  const auto frames = world_frames(scene, 42);
  MapperConfig m = cfg.mapper;
  m.train.iters = 1;  // memory does not depend on the optimizer
  Mapper voxel(m);
  m.train.window_mode = WindowMode::kReplay;
  Mapper replay(m);
  std::vector<double> stored;
  size_t bound_violations = 0, replay_drops = 0, prev_replay = 0;
  for (const auto& f : frames) {
    const FrameReport rv = voxel.integrate(f);
    const FrameReport rr = replay.integrate(f);
    const double bound = static_cast<double>(voxel.window().voxel_capacity()) * static_cast<double>(m.train.voxel_cap);
    bound_violations += static_cast<double>(rv.stored_pairs) > bound;
    stored.push_back(static_cast<double>(rv.stored_pairs));
    replay_drops += rr.stored_pairs <= prev_replay;
    prev_replay = rr.stored_pairs;
  }
  // Warm-up: the first quarter of the run, well past the window half-width.
  const std::vector<double> steady(stored.begin() + static_cast<long>(stored.size() / 4), stored.end());
  const double mean = std::accumulate(steady.begin(), steady.end(), 0.0) / static_cast<double>(steady.size());
  const auto [lo, hi] = std::minmax_element(steady.begin(), steady.end());
  const bool ok = bound_violations == 0 && *lo >= 0.9 * mean && *hi <= 1.1 * mean && replay_drops == 0;
  return {ok, fmt("steady stored pairs mean=%.0f range=[%.3f, %.3f]x bound_violations=%zu replay_final=%zu "
                  "replay_non_increasing_steps=%zu",
                  mean, *lo / mean, *hi / mean, bound_violations, prev_replay, replay_drops)};
}

// 7. Voxel selection frequency under a 10:1 density imbalance, plus branch examples.
Outcome sampling_fairness() {
  VoxelBlockStore store(1.0, 0);
  Rng rng(5);
  const int voxels = 200;
  for (int i = 0; i < voxels; ++i) {
    TrainingPair p;
    p.query = Vec3(i + 0.5, 0.5, 0.5);
    p.source_frame = i;
    const int count = i % 2 == 0 ? 400 : 40;
    for (int k = 0; k < count; ++k) store.insert(p, rng);
  }
  HierarchicalConfig hc;
  hc.n_voxels = 50;
  std::vector<double> hits(voxels, 0);
  for (int b = 0; b < 1000; ++b)
    for (const auto& p : hierarchical_sample(store, nullptr, hc, rng)) hits[p.source_frame] += 1;
  const double mean = std::accumulate(hits.begin(), hits.end(), 0.0) / voxels;
  double var = 0;
  for (double h : hits) var += (h - mean) * (h - mean);
  const double cv = std::sqrt(var / voxels) / mean;

  const HierarchicalConfig def;
  const bool branches = pairs_for_voxel(100, def) == 8 && pairs_for_voxel(10, def) == 2;
  VoxelBlockStore many(1.0, 0);
  for (int i = 0; i < 2048; ++i) {
    TrainingPair p;
    p.query = Vec3(i + 0.5, 0.5, 0.5);
    p.source_frame = i;
    for (int k = 0; k < 40; ++k) many.insert(p, rng);
  }
  const auto batch = hierarchical_sample(many, nullptr, def, rng);
  std::vector<int> ids;
  for (const auto& p : batch) ids.push_back(p.source_frame);
  std::sort(ids.begin(), ids.end());
  const auto distinct = static_cast<size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
  const bool ok = cv < 0.1 && branches && distinct == 1024 && batch.size() == 8192;
  return {ok, fmt("cv=%.4f branches(100->8, 10->2)=%s voxels_drawn=%zu of 2048, pairs=%zu", cv,
                  branches ? "ok" : "wrong", distinct, batch.size())};
}

// 8. Same seed and config give identical bytes; save/load preserves decoding.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "n3map_acceptance";
  fs::create_directories(dir);
  SynthConfig sc;
  sc.scene = "sphere";
  sc.frames = 3;
  sc.rays = 5000;
  const SceneSpec scene = make_scene(sc);
  std::vector<std::string> maps, reports;
  std::vector<ImplicitMap> trained;
  for (int run = 0; run < 2; ++run) {
    const auto frames = world_frames(scene, 9);
    MapperConfig m = sphere_mapper(0.2, 0.05, 9);
    m.train.iters = 10;
    Mapper mapper(m);
    run_mapping(mapper, frames);
    const fs::path file = dir / ("run" + std::to_string(run) + ".n3m");
    save_map(file, mapper.map(), "seed = 9\n");
    std::ifstream in(file, std::ios::binary);
    maps.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    GroundTruth gt;
    gt.points = gather_points(frames);
    EvalConfig ec;
    ec.n_samples = 50000;
    ec.seed = 9;
    reports.push_back(metrics_csv_row(evaluate_run(extract_mesh(mapper.map()), gt, ec)));
    trained.push_back(mapper.map());
  }
  const ImplicitMap loaded = load_map(dir / "run0.n3m");
  std::mt19937_64 rng(3);
  const auto& leaves = trained[0].grid().leaves();
  std::uniform_int_distribution<size_t> pick(0, leaves.size() - 1);
  std::uniform_real_distribution<double> u(0, 1);
  size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 x = (leaves[pick(rng)].cast<double>() + Vec3(u(rng), u(rng), u(rng))) * 0.2;
    mismatches += loaded.decode_sdf(x) != trained[0].decode_sdf(x);
  }
  fs::remove_all(dir);
  const bool ok = maps[0] == maps[1] && reports[0] == reports[1] && mismatches == 0;
  return {ok, fmt("map_bytes_identical=%s metrics_identical=%s reload_mismatches=%zu/1000",
                  maps[0] == maps[1] ? "yes" : "no", reports[0] == reports[1] ? "yes" : "no", mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"label accuracy ordering", label_accuracy},  {"gradient correctness", gradient_check},
      {"sdf fidelity", sdf_fidelity},               {"mesh quality", mesh_quality},
      {"ablation ordering", ablation_ordering},     {"bounded memory", bounded_memory},
      {"sampling fairness", sampling_fairness},     {"determinism and persistence", determinism},
  };
  // Optional list of criterion numbers to run, e.g. "acceptance 1 3".
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const double limits[] = {30, 10, 300, 0, 0, 0, 0, 0};  // seconds, 0 = no runtime criterion

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limits[i] > 0 && secs >= limits[i]) {
      o.pass = false;
      o.detail += fmt(" runtime over %.0f s", limits[i]);
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << criteria[i].first << "): "
              << o.detail << fmt(" [%.1f s]", secs) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
