#include "n3map/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <unordered_set>

#include "n3map/errors.hpp"
#include "n3map/kdtree.hpp"
#include "n3map/morton.hpp"
#include "n3map/normals.hpp"

namespace n3map {

namespace fs = std::filesystem;

SceneSpec make_scene(const SynthConfig& cfg) {
  SceneSpec s;
  if (cfg.scene == "sphere") {
    s.primitives.push_back(Primitive::sphere(Vec3::Zero(), 5.0));
    s.trajectory = orbit_trajectory(Vec3::Zero(), 12.0, 0.0, cfg.frames);
    s.pattern = RayPattern::kTarget;
  } else if (cfg.scene == "ground_sphere") {
    // Two passes on either side of a row of small spheres; the return leg is
    // low and far, so it sees the first leg's ground at grazing angles.
    s.primitives.push_back(Primitive::sine_ground(0.0, 0.3, 8.0));
    for (double x : {4.0, 8.0, 12.0, 16.0, 20.0}) s.primitives.push_back(Primitive::sphere(Vec3(x, 3.0, 1.0), 0.5));
    const int first = (cfg.frames + 1) / 2;
    s.trajectory = line_trajectory(Vec3(0, 0, 2), Vec3(24, 0, 2), first);
    const auto back = line_trajectory(Vec3(24, 10, 0.8), Vec3(0, 10, 0.8), cfg.frames - first);
    s.trajectory.insert(s.trajectory.end(), back.begin(), back.end());
    s.pattern = RayPattern::kLidar;
    s.max_range = 15.0;
  } else if (cfg.scene == "corridor") {
    const double length = 2.0 * cfg.frames;
    s.primitives.push_back(Primitive::sine_ground(0.0, 0.2, 10.0));
    s.primitives.push_back(Primitive::box(Vec3(length / 2, 5.0, 1.5), Vec3(length / 2 + 30, 0.5, 1.5)));
    s.primitives.push_back(Primitive::box(Vec3(length / 2, -5.0, 1.5), Vec3(length / 2 + 30, 0.5, 1.5)));
    s.trajectory = line_trajectory(Vec3(0, 0, 1.8), Vec3(length, 0, 1.8), cfg.frames);
    s.pattern = RayPattern::kLidar;
    s.max_range = 15.0;
  } else if (fs::exists(cfg.scene)) {
    s = read_scene_file(cfg.scene);
  } else {
    throw ConfigError("unknown scene '" + cfg.scene + "' (expected sphere, ground_sphere, corridor or a file)");
  }
  if (cfg.scene == "sphere" || cfg.scene == "ground_sphere" || cfg.scene == "corridor") {
    s.rays_per_scan = cfg.rays;
    s.range_noise_sigma = cfg.noise;
  }
  s.validate();
  return s;
}

SynthData synth_frames(const SceneSpec& scene, uint64_t seed, double noise) {
  SceneSpec clean_scene = scene;
  clean_scene.range_noise_sigma = 0.0;
  SceneSpec noisy_scene = scene;
  noisy_scene.range_noise_sigma = noise;
  SynthData out;
  for (size_t i = 0; i < scene.trajectory.size(); ++i) {
    const Vec3& origin = scene.trajectory[i];
    const auto dirs = scan_directions(scene, origin);
    const uint64_t frame_seed = seed * 1000003ULL + i;
    ScanFrame clean = synth_scan(clean_scene, origin, dirs, frame_seed);
    clean.frame_index = static_cast<int>(i);
    if (noise > 0) {
      ScanFrame noisy = synth_scan(noisy_scene, origin, dirs, frame_seed);
      noisy.frame_index = static_cast<int>(i);
      out.frames.push_back(std::move(noisy));
    } else {
      out.frames.push_back(clean);
    }
    out.clean.push_back(std::move(clean));
  }
  return out;
}

std::vector<Vec3> voxel_subsample(const std::vector<Vec3>& points, double spacing) {
  std::unordered_set<uint64_t> seen;
  std::vector<Vec3> out;
  for (const Vec3& p : points) {
    const Vec3 c = (p / spacing).array().floor();
    const uint64_t key = morton_encode_unchecked(static_cast<int64_t>(c.x()), static_cast<int64_t>(c.y()),
                                                 static_cast<int64_t>(c.z()));
    if (seen.insert(key).second) out.push_back(p);
  }
  return out;
}

std::vector<Vec3> gather_points(const std::vector<ScanFrame>& frames, size_t begin, size_t end) {
  std::vector<Vec3> out;
  for (size_t i = begin; i < std::min(end, frames.size()); ++i)
    out.insert(out.end(), frames[i].points.begin(), frames[i].points.end());
  return out;
}

namespace {

std::string frame_name(size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu%s", i, ext);
  return buf;
}

}  // namespace

void write_synth_dataset(const fs::path& dir, const SceneSpec& scene, const SynthData& data, double gt_spacing) {
  fs::create_directories(dir / "scans");
  std::vector<Pose> poses;
  for (size_t i = 0; i < data.frames.size(); ++i) {
    const ScanFrame& w = data.frames[i];
    Pose pose;
    pose.rotation = Mat3::Identity();
    pose.translation = w.sensor_origin;
    poses.push_back(pose);
    ScanFrame local = w;
    for (Vec3& p : local.points) p -= w.sensor_origin;
    local.sensor_origin = Vec3::Zero();
    write_ply_cloud(dir / "scans" / frame_name(i, ".ply"), local);
  }
  write_pose_file(dir / "poses.txt", poses);
  std::ofstream(dir / "scene.cfg") << scene_to_text(scene);
  write_ply_points(dir / "gt.ply", voxel_subsample(gather_points(data.clean), gt_spacing));
}

std::vector<ScanFrame> load_sequence(const fs::path& dir, const RunConfig& cfg, ReadStats* stats) {
  if (!fs::is_directory(dir)) throw FormatError("dataset directory not found: " + dir.string());
  const fs::path pose_path = dir / "poses.txt";
  if (!fs::exists(pose_path)) throw FormatError("missing pose file " + pose_path.string());
  const std::vector<Pose> poses = read_pose_file(pose_path, stats);

  std::vector<fs::path> scans;
  if (fs::is_directory(dir / "scans"))
    for (const auto& e : fs::directory_iterator(dir / "scans")) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".ply" || ext == ".bin")) scans.push_back(e.path());
    }
  std::sort(scans.begin(), scans.end());
  if (scans.empty()) throw FormatError("no scans under " + (dir / "scans").string());
  if (poses.size() < scans.size())
    throw FormatError("pose file has " + std::to_string(poses.size()) + " poses for " +
                      std::to_string(scans.size()) + " scans");

  std::vector<ScanFrame> frames;
  for (size_t i = 0; i < scans.size(); i += static_cast<size_t>(cfg.frame_stride)) {
    if (cfg.max_frames > 0 && frames.size() >= static_cast<size_t>(cfg.max_frames)) break;
    ScanFrame local = scans[i].extension() == ".bin" ? read_scan_binary(scans[i], stats) : read_ply_cloud(scans[i]);
    local.frame_index = static_cast<int>(i);
    ScanFrame world = to_world(local, poses[i]);
    world = world.has_normals() ? orient_normals(world) : estimate_normals(world, cfg.normal_k);
    frames.push_back(std::move(world));
  }
  return frames;
}

std::vector<FrameReport> run_mapping(Mapper& mapper, const std::vector<ScanFrame>& frames, std::ostream* trace_csv,
                                     std::ostream* log) {
  std::vector<FrameReport> reports;
  reports.reserve(frames.size());
  if (trace_csv) *trace_csv << kTraceHeader << '\n';
  char buf[512];
  for (const ScanFrame& f : frames) {
    FrameReport r = mapper.integrate(f);
    if (trace_csv)
      for (size_t it = 0; it < r.trace.size(); ++it) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g\n", r.frame_index, it, r.trace[it].bce,
                      r.trace[it].eikonal, r.trace[it].total);
        *trace_csv << buf;
      }
    if (log) {
      const double loss = r.trace.empty() ? 0.0 : r.trace.back().total;
      std::snprintf(buf, sizeof buf,
                    "frame=%d points=%zu pairs=%zu outside_map=%zu stored=%zu evicted=%zu leaves=%zu iters=%zu "
                    "loss=%.6f frozen=%d\n",
                    r.frame_index, f.size(), r.pair_stats.near_surface + r.pair_stats.free_space,
                    r.pairs_outside_map, r.stored_pairs, r.evicted_pairs, mapper.map().grid().leaf_count(),
                    r.trace.size(), loss, r.decoder_frozen ? 1 : 0);
      *log << buf << std::flush;
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

const std::vector<AblationVariant>& ablation_variants() {
  using S = LabelStrategy;
  using W = WindowMode;
  using B = BatchSampling;
  static const std::vector<AblationVariant> rows = {
      {"projective+replay+random", S::kProjective, W::kReplay, B::kRandom},
      {"normal+replay+random", S::kNormalGuided, W::kReplay, B::kRandom},
      {"normal+voxel+random", S::kNormalGuided, W::kVoxel, B::kRandom},
      {"projective+voxel+hier", S::kProjective, W::kVoxel, B::kHierarchical},
      {"normal+voxel+hier", S::kNormalGuided, W::kVoxel, B::kHierarchical},
      {"corrected+voxel+hier", S::kCorrected, W::kVoxel, B::kHierarchical},
      {"normal+keyframe+random", S::kNormalGuided, W::kKeyframe, B::kRandom},
  };
  return rows;
}

std::vector<AblationResult> run_ablation(const RunConfig& base, const std::vector<int>& rows, std::ostream* log) {
  std::vector<int> selected = rows;
  if (selected.empty())
    for (size_t i = 1; i <= ablation_variants().size(); ++i) selected.push_back(static_cast<int>(i));
  for (int r : selected)
    if (r < 1 || r > static_cast<int>(ablation_variants().size()))
      throw ConfigError("ablation row " + std::to_string(r) + " out of range 1..7");

  const SceneSpec scene = make_scene(base.synth);
  const SynthData data = synth_frames(scene, base.mapper.seed, base.synth.noise);
  const size_t first_visit = (data.frames.size() + 1) / 2;
  const std::vector<Vec3> observed = gather_points(data.frames, 0, first_visit);
  if (observed.empty()) throw ConfigError("ablation scene produced no first-visit observations");
  // Ground truth: exact surface samples within the cull radius of a first-visit observation.
  const double cull = base.effective_cull_radius();
  Vec3 lo = observed.front(), hi = observed.front();
  for (const Vec3& p : observed) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const KdTree observed_tree(observed);
  std::vector<Vec3> gt;
  const double spacing = std::max(base.synth.gt_spacing, base.mapper.map.leaf_size / 4);
  for (const Vec3& p : sample_scene_surface(scene, spacing, lo - Vec3::Constant(cull), hi + Vec3::Constant(cull)))
    if (observed_tree.nearest(p).dist2 <= cull * cull) gt.push_back(p);

  std::vector<AblationResult> out;
  for (int r : selected) {
    const AblationVariant& v = ablation_variants()[static_cast<size_t>(r - 1)];
    RunConfig cfg = base;
    cfg.mapper.sampler.strategy = v.strategy;
    cfg.mapper.train.window_mode = v.window;
    cfg.mapper.train.sampling = v.sampling;
    cfg.validate();
    Mapper mapper(cfg.mapper);
    run_mapping(mapper, data.frames);
    const TriangleMesh mesh =
        cull_unobserved(extract_mesh(mapper.map(), cfg.effective_mc_voxel()), observed, cfg.effective_cull_radius());
    AblationResult res;
    res.row = r;
    res.variant = v;
    if (mesh.empty()) {
      res.metrics.threshold_cm = cfg.eval.threshold * 100.0;
      res.metrics.n_gt = gt.size();
      res.metrics.accuracy_cm = res.metrics.completion_cm = res.metrics.chamfer_l1_cm =
          std::numeric_limits<double>::infinity();
    } else {
      GroundTruth truth;
      truth.points = gt;
      EvalConfig ecfg = cfg.eval;
      ecfg.seed = cfg.mapper.seed;
      res.metrics = evaluate_run(mesh, truth, ecfg);
    }
    res.metrics.seed = cfg.mapper.seed;
    if (log) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "ablate row=%d variant=%s chamfer_cm=%.3f fscore=%.2f\n", r, v.name.c_str(),
                    res.metrics.chamfer_l1_cm, res.metrics.fscore_pct);
      *log << buf << std::flush;
    }
    out.push_back(res);
  }
  return out;
}

void write_ablation_csv(const fs::path& path, const std::vector<AblationResult>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kAblationHeader << '\n';
  for (const auto& r : rows)
    out << r.row << ',' << r.variant.name << ',' << to_string(r.variant.strategy) << ','
        << to_string(r.variant.window) << ',' << to_string(r.variant.sampling) << ',' << metrics_csv_row(r.metrics)
        << '\n';
}

}  // namespace n3map
