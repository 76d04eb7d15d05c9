#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "n3map/config.hpp"
#include "n3map/eval.hpp"
#include "n3map/ingest.hpp"
#include "n3map/mapper.hpp"
#include "n3map/mesh.hpp"
#include "n3map/scene.hpp"

namespace n3map {

// Preset name or scene file. Presets:
//   sphere         R = 5 m sphere, sensor orbiting at 12 m
//   ground_sphere  sinusoidal ground plus a sphere, two passes along a line
//   corridor       ground between two walls, one long straight pass
SceneSpec make_scene(const SynthConfig& cfg);

struct SynthData {
  std::vector<ScanFrame> frames;  // world frame, sensor-facing normals, with range noise
  std::vector<ScanFrame> clean;   // same rays without noise
};
SynthData synth_frames(const SceneSpec& scene, uint64_t seed, double noise);

// Keeps the first point in every cell of the given spacing.
std::vector<Vec3> voxel_subsample(const std::vector<Vec3>& points, double spacing);
std::vector<Vec3> gather_points(const std::vector<ScanFrame>& frames, size_t begin = 0, size_t end = SIZE_MAX);

// Writes scans/NNNNNN.ply (sensor frame with normals), poses.txt, scene.cfg
// and gt.ply (noise-free hits) under `dir`.
void write_synth_dataset(const std::filesystem::path& dir, const SceneSpec& scene, const SynthData& data,
                         double gt_spacing);

// Reads poses.txt and scans/ (*.ply or *.bin, sorted by name), applies the
// stride / frame limit, moves scans to the world frame and makes sure every
// point has a sensor-facing normal. Throws FormatError before reading any scan
// if the pose file is missing or too short.
std::vector<ScanFrame> load_sequence(const std::filesystem::path& dir, const RunConfig& cfg,
                                     ReadStats* stats = nullptr);

// Integrates the frames in order. Loss rows go to `trace_csv` (if given),
// one progress line per frame to `log` (if given).
std::vector<FrameReport> run_mapping(Mapper& mapper, const std::vector<ScanFrame>& frames,
                                     std::ostream* trace_csv = nullptr, std::ostream* log = nullptr);
inline constexpr const char* kTraceHeader = "frame,iter,bce,eikonal,total";

struct AblationVariant {
  std::string name;
  LabelStrategy strategy;
  WindowMode window;
  BatchSampling sampling;
};
// The seven rows of the ablation grid, full method fifth.
const std::vector<AblationVariant>& ablation_variants();

struct AblationResult {
  int row = 0;  // 1-based
  AblationVariant variant;
  MetricsReport metrics;
};

// Runs the selected rows (1-based; empty = all) on the base configuration's
// synthetic scene. Scores are measured on the surfaces observed during the
// first half of the trajectory (the first visit), after the whole run.
std::vector<AblationResult> run_ablation(const RunConfig& base, const std::vector<int>& rows,
                                         std::ostream* log = nullptr);
inline constexpr const char* kAblationHeader =
    "row,variant,strategy,window_mode,sampling_mode,acc_cm,comp_cm,chamfer_l1_cm,comp_ratio_pct,fscore_pct,"
    "threshold_cm,n_pred,n_gt,seed";
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationResult>& rows);

}  // namespace n3map
