#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "n3map/decoder.hpp"
#include "n3map/feature_grid.hpp"
#include "n3map/losses.hpp"
#include "n3map/sampling.hpp"

namespace n3map {

struct MapConfig {
  double leaf_size = 0.2;
  int levels = 3;
  double fd_step = 0.0;  // finite-difference step for SDF gradients; 0 selects leaf_size / 4

  [[nodiscard]] double gradient_step() const { return fd_step > 0 ? fd_step : leaf_size / 4.0; }
};

// Sparse gradient accumulator: dense decoder gradient plus per-feature slots
// with a list of the features touched since the last clear().
struct Gradients {
  Eigen::VectorXd decoder = Eigen::VectorXd::Zero(MlpDecoder::kParamCount);
  std::vector<Feature> features;
  std::vector<uint32_t> touched;

  void prepare(size_t feature_count);
  void clear();
  void add_feature(uint32_t index, const Feature& g);

 private:
  std::vector<uint8_t> mark_;
};

// The implicit SDF map: feature grid + shared decoder.
class ImplicitMap {
 public:
  ImplicitMap(const MapConfig& cfg, uint64_t seed);

  [[nodiscard]] const MapConfig& config() const { return cfg_; }
  [[nodiscard]] FeatureGrid& grid() { return grid_; }
  [[nodiscard]] const FeatureGrid& grid() const { return grid_; }
  [[nodiscard]] MlpDecoder& decoder() { return decoder_; }
  [[nodiscard]] const MlpDecoder& decoder() const { return decoder_; }

  size_t allocate(std::span<const Vec3> points, double radius);

  [[nodiscard]] std::optional<double> try_decode(const Vec3& x) const;
  // Throws OutOfMapError outside allocated space.
  [[nodiscard]] double decode_sdf(const Vec3& x) const;

  // Central differences with step h (one-sided on axes where a stencil point
  // is unallocated). Returns false when some axis has no usable stencil.
  bool try_gradient(const Vec3& x, double h, Vec3& grad) const;
  [[nodiscard]] Vec3 sdf_gradient(const Vec3& x) const;
  [[nodiscard]] Vec3 sdf_gradient(const Vec3& x, double h) const;

  // Mean BCE over the batch plus lambda_e times the mean eikonal term over
  // near-surface pairs. When `grads` is non-null, exact gradients of that
  // loss are accumulated into it (decoder gradients only if not frozen).
  // Throws OutOfMapError / NumericalError naming the offending pair.
  LossTerms forward_backward(std::span<const TrainingPair> batch, const LossConfig& cfg, Gradients* grads) const;

  void freeze_decoder() { decoder_.freeze(); }

 private:
  MapConfig cfg_;
  FeatureGrid grid_;
  MlpDecoder decoder_;
  Rng feature_rng_;
};

inline LossTerms total_loss(std::span<const TrainingPair> batch, const ImplicitMap& map, const LossConfig& cfg) {
  return map.forward_backward(batch, cfg, nullptr);
}

}  // namespace n3map
