#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "n3map/scene.hpp"
#include "n3map/types.hpp"

namespace n3map {

using Rng = std::mt19937_64;

enum class LabelStrategy : uint8_t { kNormalGuided, kProjective, kCorrected };
enum class PairKind : uint8_t { kNearSurface, kFreeSpace };

const char* to_string(LabelStrategy s);
LabelStrategy parse_strategy(const std::string& s);  // throws ConfigError

// A query point with its SDF label (metres, free space positive).
struct TrainingPair {
  Vec3 query;
  double sdf_label = 0.0;
  PairKind kind = PairKind::kNearSurface;
  int32_t source_frame = 0;
};

struct SamplerConfig {
  double sigma = 0.1;  // near-surface Gaussian scale
  double tr = 0.3;     // truncation, normally 3 * sigma
  int n_surface = 3;
  int n_free = 3;
  LabelStrategy strategy = LabelStrategy::kNormalGuided;
  double free_min_distance = 1.0;  // free-space samples start this far from the sensor
  bool nn_sanity_check = false;    // drop normal-guided samples nearer to another measured point

  void validate() const;  // throws ConfigError
};

// Deterministic per-point generator for (seed, frame, point).
Rng point_rng(uint64_t seed, int64_t frame_index, uint64_t point_index);

// Builders for one sample at a given signed offset t (positive towards the sensor).
TrainingPair normal_guided_pair(const Vec3& p, const Vec3& n, double t, int32_t frame = 0);
TrainingPair projective_pair(const Vec3& origin, const Vec3& p, double t, int32_t frame = 0);
TrainingPair corrected_pair(const Vec3& origin, const Vec3& p, const Vec3& n, double t, int32_t frame = 0);

// n_surface samples along the sensor-facing normal, t ~ N(0, sigma) redrawn
// until |t| <= tr; label = t.
std::vector<TrainingPair> normal_guided_labels(const Vec3& p, const Vec3& n, const SamplerConfig& cfg,
                                               Rng& rng, int32_t frame = 0);
// n_free samples uniform on the ray segment from free_min_distance to tr short
// of the hit; label = tr. Empty if the ray is too short.
std::vector<TrainingPair> free_space_labels(const Vec3& origin, const Vec3& p, const SamplerConfig& cfg,
                                            Rng& rng, int32_t frame = 0);
// Ray samples x = p - t r with t ~ N(0, sigma) clipped to [-tr, tr]; label = t.
std::vector<TrainingPair> projective_labels(const Vec3& origin, const Vec3& p, const SamplerConfig& cfg,
                                            Rng& rng, int32_t frame = 0);
// Same ray samples with the label projected on the normal: t * |cos(incidence)|.
std::vector<TrainingPair> corrected_labels(const Vec3& origin, const Vec3& p, const Vec3& n,
                                           const SamplerConfig& cfg, Rng& rng, int32_t frame = 0);

struct PairStats {
  size_t near_surface = 0;
  size_t free_space = 0;
  size_t skipped_invalid_normal = 0;  // normal-guided points without a usable normal
  size_t corrected_fallbacks = 0;     // corrected strategy fell back to projective
  size_t sanity_rejected = 0;
};

// All pairs for a world-frame scan under cfg.strategy.
std::vector<TrainingPair> generate_pairs(const ScanFrame& frame, const SamplerConfig& cfg, uint64_t seed,
                                         PairStats* stats = nullptr);

struct AuditRow {
  LabelStrategy strategy;
  double rmse_m = 0.0;
  double mean_abs_m = 0.0;
  double max_abs_m = 0.0;
  size_t n_pairs = 0;
};

// Compares near-surface labels against the scene's exact SDF, per strategy.
// Only points whose incidence angle exceeds min_incidence_deg contribute.
std::vector<AuditRow> label_audit(const SceneSpec& scene, const std::vector<ScanFrame>& frames,
                                  const SamplerConfig& base, const std::vector<LabelStrategy>& strategies,
                                  uint64_t seed, double min_incidence_deg = 0.0);

void write_audit_csv(const std::filesystem::path& path, const std::vector<AuditRow>& rows);

}  // namespace n3map
