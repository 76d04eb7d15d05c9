#include "n3map/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

#include "n3map/errors.hpp"
#include "n3map/kdtree.hpp"
#include "n3map/sampling.hpp"

namespace n3map {

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, size_t n_points, uint64_t seed) {
  if (mesh.triangles.empty()) throw std::invalid_argument("sample_mesh_surface: empty mesh");
  if (n_points == 0) throw std::invalid_argument("sample_mesh_surface: n_points must be >= 1");
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0)) throw std::invalid_argument("sample_mesh_surface: mesh has zero area");

  Rng rng = point_rng(seed, -4, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n_points);
  for (size_t i = 0; i < n_points; ++i) {
    const double r = u01(rng) * total;
    size_t f = static_cast<size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    f = std::min(f, cumulative.size() - 1);
    double s = u01(rng), t = u01(rng);
    if (s + t > 1.0) {
      s = 1.0 - s;
      t = 1.0 - t;
    }
    const auto& tri = mesh.triangles[f];
    const Vec3& a = mesh.vertices[tri[0]];
    out.push_back(a + s * (mesh.vertices[tri[1]] - a) + t * (mesh.vertices[tri[2]] - a));
  }
  return out;
}

namespace {

// Mean nearest distance from `from` into `tree` and the fraction below threshold.
std::pair<double, double> one_sided(const std::vector<Vec3>& from, const KdTree& tree, double threshold) {
  double sum = 0;
  size_t hits = 0;
  for (const Vec3& p : from) {
    const double d = std::sqrt(tree.nearest(p).dist2);
    sum += d;
    hits += d < threshold;
  }
  const auto n = static_cast<double>(from.size());
  return {sum / n, static_cast<double>(hits) / n};
}

}  // namespace

MetricsReport compute_metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, double threshold) {
  if (pred.empty() || gt.empty()) throw std::invalid_argument("compute_metrics: empty point set");
  if (!(threshold > 0)) throw std::invalid_argument("compute_metrics: threshold must be positive");
  const KdTree pred_tree(pred), gt_tree(gt);
  const auto [acc, precision] = one_sided(pred, gt_tree, threshold);
  const auto [comp, recall] = one_sided(gt, pred_tree, threshold);

  MetricsReport r;
  r.accuracy_cm = acc * 100.0;
  r.completion_cm = comp * 100.0;
  r.chamfer_l1_cm = 0.5 * (r.accuracy_cm + r.completion_cm);
  r.precision_pct = precision * 100.0;
  r.completion_ratio_pct = recall * 100.0;
  r.fscore_pct = precision + recall > 0 ? 100.0 * 2.0 * precision * recall / (precision + recall) : 0.0;
  r.threshold_cm = threshold * 100.0;
  r.n_pred = pred.size();
  r.n_gt = gt.size();
  return r;
}

MetricsReport evaluate_run(const TriangleMesh& pred, const GroundTruth& gt, const EvalConfig& cfg,
                           const std::vector<Vec3>* cull_reference) {
  const TriangleMesh culled = cfg.cull_radius > 0 && cull_reference
                                  ? cull_unobserved(pred, *cull_reference, cfg.cull_radius)
                                  : pred;
  const std::vector<Vec3> pred_points = sample_mesh_surface(culled, cfg.n_samples, cfg.seed);
  const std::vector<Vec3> gt_points =
      gt.is_cloud ? gt.points : sample_mesh_surface(gt.mesh, cfg.n_samples, cfg.seed + 1);
  MetricsReport r = compute_metrics(pred_points, gt_points, cfg.threshold);
  r.seed = cfg.seed;
  return r;
}

std::string metrics_csv_row(const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu,%llu", r.accuracy_cm, r.completion_cm,
                r.chamfer_l1_cm, r.completion_ratio_pct, r.fscore_pct, r.threshold_cm, r.n_pred, r.n_gt,
                static_cast<unsigned long long>(r.seed));
  return buf;
}

void append_metrics_csv(const std::filesystem::path& path, const MetricsReport& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot write " + path.string());
  if (fresh) out << kMetricsHeader << '\n';
  out << metrics_csv_row(r) << '\n';
}

std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError(path.string() + ": bad metrics header");
  std::vector<MetricsReport> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    MetricsReport r;
    if (!(ss >> r.accuracy_cm >> r.completion_cm >> r.chamfer_l1_cm >> r.completion_ratio_pct >> r.fscore_pct >>
          r.threshold_cm >> r.n_pred >> r.n_gt >> r.seed))
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

void append_metrics_jsonl(const std::filesystem::path& path, const MetricsReport& r,
                          const std::map<std::string, std::string>& provenance) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw FormatError("cannot write " + path.string());
  nlohmann::json j = {{"acc_cm", r.accuracy_cm},
                      {"comp_cm", r.completion_cm},
                      {"chamfer_l1_cm", r.chamfer_l1_cm},
                      {"comp_ratio_pct", r.completion_ratio_pct},
                      {"precision_pct", r.precision_pct},
                      {"fscore_pct", r.fscore_pct},
                      {"threshold_cm", r.threshold_cm},
                      {"n_pred", r.n_pred},
                      {"n_gt", r.n_gt},
                      {"seed", r.seed},
                      {"config", provenance}};
  out << j.dump() << '\n';
}

}  // namespace n3map
