#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "n3map/morton.hpp"
#include "n3map/sampling.hpp"
#include "n3map/types.hpp"

namespace n3map {

inline constexpr int kFeatureDim = 8;
inline constexpr int kMaxLevels = 6;
using Feature = Eigen::Matrix<double, kFeatureDim, 1>;

// Trilinear stencil of one query across all levels: 8 corner feature indices
// and weights per level.
struct CornerStencil {
  int levels = 0;
  std::array<uint32_t, 8 * kMaxLevels> index{};
  std::array<double, 8 * kMaxLevels> weight{};

  [[nodiscard]] int size() const { return 8 * levels; }
};

// Sparse multi-level feature grid. Leaf voxels (level 0) have edge length
// `leaf_size`; level l voxels have edge leaf_size * 2^l. Allocating a leaf also
// allocates the corner vertices of the voxels containing it at every level, so
// any point inside an allocated leaf has a complete stencil.
class FeatureGrid {
 public:
  FeatureGrid(double leaf_size, int levels);

  [[nodiscard]] double leaf_size() const { return leaf_size_; }
  [[nodiscard]] int levels() const { return levels_; }

  [[nodiscard]] Vec3i leaf_of(const Vec3& x) const;
  [[nodiscard]] bool leaf_allocated(const Vec3i& leaf) const;
  [[nodiscard]] bool contains(const Vec3& x) const { return leaf_allocated(leaf_of(x)); }

  // Allocates every leaf whose centre is within `radius` of a point. New
  // features are drawn from U(-init_scale, init_scale). Returns the number of
  // new leaves; existing leaves are left untouched.
  size_t allocate(std::span<const Vec3> points, double radius, Rng& rng, double init_scale = 1e-4);

  // False if x is outside allocated space.
  bool stencil(const Vec3& x, CornerStencil& out) const;
  // Sum over levels of the trilinearly interpolated features; throws OutOfMapError.
  [[nodiscard]] Feature query_feature(const Vec3& x) const;
  [[nodiscard]] Feature interpolate(const CornerStencil& s) const;

  [[nodiscard]] size_t leaf_count() const { return leaves_.size(); }
  [[nodiscard]] const std::vector<Vec3i>& leaves() const { return leaves_; }  // allocation order
  [[nodiscard]] size_t feature_count() const { return features_.size(); }
  [[nodiscard]] std::vector<Feature>& features() { return features_; }
  [[nodiscard]] const std::vector<Feature>& features() const { return features_; }
  [[nodiscard]] const std::vector<MortonKey>& vertex_keys() const { return vertex_keys_; }

  // Rebuild from serialized content (vertex order defines feature indices).
  void restore(std::vector<MortonKey> vertex_keys, std::vector<Feature> features, const std::vector<Vec3i>& leaves);

 private:
  uint32_t vertex(int level, const Vec3i& v, Rng* rng, double init_scale);
  void add_leaf(const Vec3i& leaf, Rng* rng, double init_scale);

  double leaf_size_;
  int levels_;
  std::vector<std::unordered_map<uint64_t, uint32_t>> vertex_index_;  // per level
  std::vector<MortonKey> vertex_keys_;
  std::vector<Feature> features_;
  std::unordered_map<uint64_t, uint32_t> leaf_index_;  // leaf code -> row in leaf_corners_
  std::vector<Vec3i> leaves_;
  std::vector<uint32_t> leaf_corners_;  // 8 * levels_ feature indices per leaf
};

}  // namespace n3map
