#include "n3map/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>

#include "n3map/errors.hpp"
#include "n3map/kdtree.hpp"

namespace n3map {
namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double draw_clipped(std::normal_distribution<double>& g, Rng& rng, double tr) {
  return std::clamp(g(rng), -tr, tr);
}

double draw_truncated(std::normal_distribution<double>& g, Rng& rng, double tr) {
  for (;;) {
    const double t = g(rng);
    if (std::abs(t) <= tr) return t;
  }
}

}  // namespace

const char* to_string(LabelStrategy s) {
  switch (s) {
    case LabelStrategy::kNormalGuided: return "normal_guided";
    case LabelStrategy::kProjective: return "projective";
    case LabelStrategy::kCorrected: return "corrected";
  }
  return "?";
}

LabelStrategy parse_strategy(const std::string& s) {
  if (s == "normal_guided" || s == "normal") return LabelStrategy::kNormalGuided;
  if (s == "projective") return LabelStrategy::kProjective;
  if (s == "corrected") return LabelStrategy::kCorrected;
  throw ConfigError("unknown label strategy '" + s + "'");
}

void SamplerConfig::validate() const {
  if (!(sigma > 0)) throw ConfigError("sigma must be positive");
  if (!(tr > 0)) throw ConfigError("truncation must be positive");
  if (n_surface < 0 || n_free < 0) throw ConfigError("sample counts must be non-negative");
  if (free_min_distance < 0) throw ConfigError("free-space minimum distance must be non-negative");
}

Rng point_rng(uint64_t seed, int64_t frame_index, uint64_t point_index) {
  uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<uint64_t>(frame_index));
  h = splitmix64(h ^ point_index);
  return Rng(h);
}

TrainingPair normal_guided_pair(const Vec3& p, const Vec3& n, double t, int32_t frame) {
  return {p + t * n, t, PairKind::kNearSurface, frame};
}

TrainingPair projective_pair(const Vec3& origin, const Vec3& p, double t, int32_t frame) {
  const Vec3 r = (p - origin).normalized();
  return {p - t * r, t, PairKind::kNearSurface, frame};
}

TrainingPair corrected_pair(const Vec3& origin, const Vec3& p, const Vec3& n, double t, int32_t frame) {
  const Vec3 r = (p - origin).normalized();
  // |(p - x) . n| with the sign of the projective label
  return {p - t * r, t * std::abs(r.dot(n)), PairKind::kNearSurface, frame};
}

std::vector<TrainingPair> normal_guided_labels(const Vec3& p, const Vec3& n, const SamplerConfig& cfg,
                                               Rng& rng, int32_t frame) {
  std::normal_distribution<double> g(0.0, cfg.sigma);
  std::vector<TrainingPair> out;
  out.reserve(cfg.n_surface);
  for (int i = 0; i < cfg.n_surface; ++i) out.push_back(normal_guided_pair(p, n, draw_truncated(g, rng, cfg.tr), frame));
  return out;
}

std::vector<TrainingPair> free_space_labels(const Vec3& origin, const Vec3& p, const SamplerConfig& cfg,
                                            Rng& rng, int32_t frame) {
  const double len = (p - origin).norm();
  if (len <= cfg.free_min_distance + cfg.tr) return {};
  std::uniform_real_distribution<double> u(cfg.free_min_distance / len, 1.0 - cfg.tr / len);
  std::vector<TrainingPair> out;
  out.reserve(cfg.n_free);
  for (int i = 0; i < cfg.n_free; ++i)
    out.push_back({origin + u(rng) * (p - origin), cfg.tr, PairKind::kFreeSpace, frame});
  return out;
}

std::vector<TrainingPair> projective_labels(const Vec3& origin, const Vec3& p, const SamplerConfig& cfg,
                                            Rng& rng, int32_t frame) {
  std::normal_distribution<double> g(0.0, cfg.sigma);
  std::vector<TrainingPair> out;
  out.reserve(cfg.n_surface);
  for (int i = 0; i < cfg.n_surface; ++i) out.push_back(projective_pair(origin, p, draw_clipped(g, rng, cfg.tr), frame));
  return out;
}

std::vector<TrainingPair> corrected_labels(const Vec3& origin, const Vec3& p, const Vec3& n,
                                           const SamplerConfig& cfg, Rng& rng, int32_t frame) {
  std::normal_distribution<double> g(0.0, cfg.sigma);
  std::vector<TrainingPair> out;
  out.reserve(cfg.n_surface);
  for (int i = 0; i < cfg.n_surface; ++i)
    out.push_back(corrected_pair(origin, p, n, draw_clipped(g, rng, cfg.tr), frame));
  return out;
}

std::vector<TrainingPair> generate_pairs(const ScanFrame& frame, const SamplerConfig& cfg, uint64_t seed,
                                         PairStats* stats) {
  cfg.validate();
  PairStats local;
  std::vector<TrainingPair> out;
  out.reserve(frame.size() * static_cast<size_t>(cfg.n_surface + cfg.n_free));
  std::unique_ptr<KdTree> tree;
  if (cfg.nn_sanity_check && cfg.strategy == LabelStrategy::kNormalGuided && frame.size() > 1)
    tree = std::make_unique<KdTree>(frame.points);
  const Vec3& o = frame.sensor_origin;
  const int32_t fi = frame.frame_index;

  for (size_t i = 0; i < frame.size(); ++i) {
    const Vec3& p = frame.points[i];
    Rng rng = point_rng(seed, fi, i);
    const bool usable = frame.normal_usable(i);
    std::vector<TrainingPair> near;
    switch (cfg.strategy) {
      case LabelStrategy::kNormalGuided:
        if (!usable) {
          ++local.skipped_invalid_normal;
          break;
        }
        near = normal_guided_labels(p, frame.normals[i], cfg, rng, fi);
        if (tree) {
          // A sample much closer to another measured point than to its own
          // surface point has probably crossed onto a different surface.
          std::erase_if(near, [&](const TrainingPair& pr) {
            const double nn = std::sqrt(tree->nearest(pr.query).dist2);
            const bool reject = nn + cfg.sigma < std::abs(pr.sdf_label);
            if (reject) ++local.sanity_rejected;
            return reject;
          });
        }
        break;
      case LabelStrategy::kProjective:
        near = projective_labels(o, p, cfg, rng, fi);
        break;
      case LabelStrategy::kCorrected:
        if (usable) {
          near = corrected_labels(o, p, frame.normals[i], cfg, rng, fi);
        } else {
          ++local.corrected_fallbacks;
          near = projective_labels(o, p, cfg, rng, fi);
        }
        break;
    }
    local.near_surface += near.size();
    out.insert(out.end(), near.begin(), near.end());
    const auto free = free_space_labels(o, p, cfg, rng, fi);
    local.free_space += free.size();
    out.insert(out.end(), free.begin(), free.end());
  }
  if (stats) *stats = local;
  return out;
}

std::vector<AuditRow> label_audit(const SceneSpec& scene, const std::vector<ScanFrame>& frames,
                                  const SamplerConfig& base, const std::vector<LabelStrategy>& strategies,
                                  uint64_t seed, double min_incidence_deg) {
  const double cos_limit = std::cos(min_incidence_deg * std::numbers::pi / 180.0);
  std::vector<AuditRow> rows;
  for (LabelStrategy strategy : strategies) {
    SamplerConfig cfg = base;
    cfg.strategy = strategy;
    cfg.validate();
    AuditRow row{strategy};
    double sum_sq = 0.0, sum_abs = 0.0;
    for (const ScanFrame& frame : frames) {
      const Vec3& o = frame.sensor_origin;
      for (size_t i = 0; i < frame.size(); ++i) {
        if (!frame.normal_usable(i)) continue;
        const Vec3& p = frame.points[i];
        const Vec3& n = frame.normals[i];
        const double cos_inc = std::abs((p - o).normalized().dot(n));
        if (min_incidence_deg > 0 && !(cos_inc < cos_limit)) continue;
        Rng rng = point_rng(seed, frame.frame_index, i);
        std::vector<TrainingPair> pairs;
        switch (strategy) {
          case LabelStrategy::kNormalGuided: pairs = normal_guided_labels(p, n, cfg, rng); break;
          case LabelStrategy::kProjective: pairs = projective_labels(o, p, cfg, rng); break;
          case LabelStrategy::kCorrected: pairs = corrected_labels(o, p, n, cfg, rng); break;
        }
        for (const auto& pr : pairs) {
          const double err = std::abs(pr.sdf_label - oracle_sdf(scene, pr.query));
          sum_sq += err * err;
          sum_abs += err;
          row.max_abs_m = std::max(row.max_abs_m, err);
          ++row.n_pairs;
        }
      }
    }
    if (row.n_pairs > 0) {
      row.rmse_m = std::sqrt(sum_sq / row.n_pairs);
      row.mean_abs_m = sum_abs / row.n_pairs;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_audit_csv(const std::filesystem::path& path, const std::vector<AuditRow>& rows) {
  std::ofstream os(path);
  if (!os) throw FormatError("audit: cannot write " + path.string());
  os.precision(10);
  os << "strategy,rmse_m,mean_abs_m,max_abs_m,n_pairs\n";
  for (const auto& r : rows)
    os << to_string(r.strategy) << ',' << r.rmse_m << ',' << r.mean_abs_m << ',' << r.max_abs_m << ','
       << r.n_pairs << '\n';
}

}  // namespace n3map
