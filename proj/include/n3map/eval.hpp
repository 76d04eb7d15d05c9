#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "n3map/mesh.hpp"
#include "n3map/types.hpp"

namespace n3map {

struct MetricsReport {
  double accuracy_cm = 0;
  double completion_cm = 0;
  double chamfer_l1_cm = 0;
  double completion_ratio_pct = 0;  // recall
  double precision_pct = 0;
  double fscore_pct = 0;
  double threshold_cm = 0;
  size_t n_pred = 0;
  size_t n_gt = 0;
  uint64_t seed = 0;
};

// Published results of the full method, kept for comparison against runs on
// the real datasets. Not reproducible on synthetic scenes.
namespace reference {
inline constexpr double kMaiCityChamferCm = 3.91;
inline constexpr double kMaiCityFscorePct = 96.05;
inline constexpr double kNewerCollegeChamferCm = 8.04;
inline constexpr double kNewerCollegeFscorePct = 94.54;
}  // namespace reference

// Area-weighted uniform samples; throws std::invalid_argument for an empty or
// zero-area mesh or n_points == 0.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, size_t n_points, uint64_t seed);

// Nearest-neighbour metrics; a point counts as matched when its distance is
// strictly below `threshold` (metres). Throws std::invalid_argument on empty input.
MetricsReport compute_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold);

struct EvalConfig {
  double threshold = 0.1;     // metres
  size_t n_samples = 1000000;  // surface samples per mesh
  double cull_radius = 0.0;   // 0 disables culling
  uint64_t seed = 42;
};

// Ground truth is either a point cloud (used as is) or a mesh (sampled).
struct GroundTruth {
  std::vector<Vec3> points;
  TriangleMesh mesh;
  bool is_cloud = true;
};

// Culls `pred` against `cull_reference` when cull_radius > 0 and a reference
// is given, samples both surfaces and computes metrics.
MetricsReport evaluate_run(const TriangleMesh& pred, const GroundTruth& gt, const EvalConfig& cfg,
                           const std::vector<Vec3>* cull_reference = nullptr);

inline constexpr const char* kMetricsHeader =
    "acc_cm,comp_cm,chamfer_l1_cm,comp_ratio_pct,fscore_pct,threshold_cm,n_pred,n_gt,seed";

std::string metrics_csv_row(const MetricsReport& r);
// Writes the header when the file is new or empty, then appends one row.
void append_metrics_csv(const std::filesystem::path& path, const MetricsReport& r);
std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path);
// One JSON object per line with the metrics and the given key/value provenance.
void append_metrics_jsonl(const std::filesystem::path& path, const MetricsReport& r,
                          const std::map<std::string, std::string>& provenance);

}  // namespace n3map
