#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "n3map/sampling.hpp"
#include "n3map/types.hpp"

namespace n3map {

// Axis-aligned box in leaf-voxel coordinates centred on the sensor, with
// closed bounds [lower, upper].
struct SlidingWindow {
  Vec3i center = Vec3i::Zero();
  int64_t half_extent = 0;
  Vec3i lower = Vec3i::Zero();
  Vec3i upper = Vec3i::Zero();

  [[nodiscard]] bool contains(const Vec3i& voxel) const {
    return (voxel.array() >= lower.array()).all() && (voxel.array() <= upper.array()).all();
  }
  [[nodiscard]] uint64_t voxel_capacity() const {
    const auto side = static_cast<uint64_t>(2 * half_extent + 1);
    return side * side * side;
  }
};

// center = floor(origin / v), half extent = floor(range / v).
SlidingWindow update_window(const Vec3& origin, double range, double voxel_size);

struct VoxelBlock {
  Vec3i voxel;
  std::vector<TrainingPair> pairs;
  uint64_t seen = 0;  // pairs offered to this block, including dropped ones
};

// Training memory: one pair array per leaf voxel plus a look-up table from
// the voxel's Morton code to its array. Arrays are capped (cap = 0 means
// unbounded) with reservoir replacement.
class VoxelBlockStore {
 public:
  explicit VoxelBlockStore(double voxel_size, size_t cap = 4096);

  [[nodiscard]] Vec3i voxel_of(const Vec3& x) const;

  void insert(std::span<const TrainingPair> pairs, Rng& rng);
  void insert(const TrainingPair& pair, Rng& rng);
  // Drops every voxel outside the window; returns the number of pairs freed.
  size_t evict_outside(const SlidingWindow& window);

  [[nodiscard]] const std::vector<VoxelBlock>& blocks() const { return blocks_; }
  [[nodiscard]] const VoxelBlock* find(const Vec3i& voxel) const;
  [[nodiscard]] size_t voxel_count() const { return blocks_.size(); }
  [[nodiscard]] size_t total_pairs() const { return total_; }
  [[nodiscard]] size_t cap() const { return cap_; }
  [[nodiscard]] double voxel_size() const { return voxel_size_; }

 private:
  double voxel_size_;
  size_t cap_;
  std::vector<VoxelBlock> blocks_;              // L_P
  std::unordered_map<uint64_t, uint32_t> table_;  // T: voxel code -> index into blocks_
  size_t total_ = 0;
};

struct HierarchicalConfig {
  int n_voxels = 1024;   // N_v
  int n_per_voxel = 8;   // N_p
  int threshold = 32;    // N_t
};

// Pairs drawn from one voxel: N_p if it holds more than N_t pairs, otherwise
// max(1, floor(N_p / 3)).
int pairs_for_voxel(size_t available, const HierarchicalConfig& cfg);

// Two-stage draw: min(N_v, occupied) distinct voxels inside the window (all
// voxels when window is null), then pairs_for_voxel() pairs from each, without
// replacement unless more are requested than available.
std::vector<TrainingPair> hierarchical_sample(const VoxelBlockStore& store, const SlidingWindow* window,
                                              const HierarchicalConfig& cfg, Rng& rng);

// Uniform draw (with replacement) of `count` pairs from a flat pool.
std::vector<TrainingPair> random_sample(std::span<const TrainingPair* const> pool, size_t count, Rng& rng);

}  // namespace n3map
