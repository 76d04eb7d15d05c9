#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "n3map/implicit_map.hpp"
#include "n3map/voxel_store.hpp"

namespace n3map {

// Adam-style adaptive moments. Feature moments are updated lazily: only the
// features touched by the current batch move.
struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const AdamConfig& cfg = {});

  void step(ImplicitMap& map, const Gradients& grads);
  [[nodiscard]] int64_t steps() const { return steps_; }

 private:
  AdamConfig cfg_;
  int64_t steps_ = 0;
  Eigen::VectorXd m_dec_, v_dec_;
  std::vector<Feature> m_feat_, v_feat_;
};

enum class WindowMode : uint8_t {
  kVoxel,     // per-voxel pair arrays, evicted outside the sliding window
  kKeyframe,  // pairs of the K most recent frames
  kReplay,    // every pair ever generated (unbounded)
};
enum class BatchSampling : uint8_t { kHierarchical, kRandom };

const char* to_string(WindowMode m);
const char* to_string(BatchSampling m);
WindowMode parse_window_mode(const std::string& s);
BatchSampling parse_batch_sampling(const std::string& s);

struct TrainConfig {
  int iters = 40;
  HierarchicalConfig hierarchical;
  int freeze_after = 10;       // decoder frozen after this many frames (0 = never)
  double window_range = 30.0;  // metres
  WindowMode window_mode = WindowMode::kVoxel;
  int keyframes = 10;
  BatchSampling sampling = BatchSampling::kHierarchical;
  size_t voxel_cap = 4096;  // 0 = unbounded
  AdamConfig adam;

  // Random sampling draws as many pairs as a full hierarchical batch.
  [[nodiscard]] size_t random_batch_size() const {
    return static_cast<size_t>(hierarchical.n_voxels) * static_cast<size_t>(hierarchical.n_per_voxel);
  }
};

struct MapperConfig {
  MapConfig map;
  SamplerConfig sampler;
  LossConfig loss;
  TrainConfig train;
  uint64_t seed = 42;

  void validate() const;  // throws ConfigError
  // Leaves within (tr + leaf size) of a measured point are allocated.
  [[nodiscard]] double allocation_radius() const { return sampler.tr + map.leaf_size; }
};

struct FrameReport {
  int frame_index = 0;
  std::vector<LossTerms> trace;  // one entry per optimization step
  PairStats pair_stats;
  size_t pairs_outside_map = 0;
  size_t pairs_outside_window = 0;
  size_t new_leaves = 0;
  size_t evicted_pairs = 0;
  size_t stored_pairs = 0;
  bool decoder_frozen = false;
};

// Incremental trainer: turns oriented world-frame scans into training pairs,
// keeps them in the selected memory, and optimizes the implicit map.
class Mapper {
 public:
  explicit Mapper(const MapperConfig& cfg);

  // Expects a world-frame scan with sensor-facing normals.
  FrameReport integrate(const ScanFrame& frame);

  [[nodiscard]] ImplicitMap& map() { return map_; }
  [[nodiscard]] const ImplicitMap& map() const { return map_; }
  [[nodiscard]] const MapperConfig& config() const { return cfg_; }
  [[nodiscard]] const VoxelBlockStore& store() const { return store_; }
  [[nodiscard]] size_t stored_pairs() const;
  [[nodiscard]] int frames_integrated() const { return frames_; }
  [[nodiscard]] const SlidingWindow& window() const { return window_; }

 private:
  std::vector<TrainingPair> draw_batch();

  MapperConfig cfg_;
  ImplicitMap map_;
  AdamOptimizer optimizer_;
  Gradients grads_;
  Rng rng_;

  VoxelBlockStore store_;                             // kVoxel
  SlidingWindow window_;
  std::deque<std::vector<TrainingPair>> frame_pairs_;  // kKeyframe / kReplay
  size_t frame_pair_total_ = 0;
  // Per-frame sampling views for the frame-based memories.
  VoxelBlockStore scratch_store_;
  std::vector<const TrainingPair*> flat_pool_;
  int frames_ = 0;
};

}  // namespace n3map
