#include "n3map/voxel_store.hpp"

#include <algorithm>
#include <cmath>

#include "n3map/errors.hpp"
#include "n3map/morton.hpp"

namespace n3map {
namespace {

int64_t floor_to_int(double v) { return static_cast<int64_t>(std::floor(v)); }

}  // namespace

SlidingWindow update_window(const Vec3& origin, double range, double voxel_size) {
  if (!(range > 0) || !(voxel_size > 0)) throw ConfigError("window range and voxel size must be positive");
  SlidingWindow w;
  w.center = Vec3i(floor_to_int(origin.x() / voxel_size), floor_to_int(origin.y() / voxel_size),
                   floor_to_int(origin.z() / voxel_size));
  w.half_extent = floor_to_int(range / voxel_size);
  w.lower = w.center - Vec3i::Constant(w.half_extent);
  w.upper = w.center + Vec3i::Constant(w.half_extent);
  return w;
}

VoxelBlockStore::VoxelBlockStore(double voxel_size, size_t cap) : voxel_size_(voxel_size), cap_(cap) {
  if (!(voxel_size > 0)) throw ConfigError("voxel size must be positive");
}

Vec3i VoxelBlockStore::voxel_of(const Vec3& x) const {
  return {floor_to_int(x.x() / voxel_size_), floor_to_int(x.y() / voxel_size_), floor_to_int(x.z() / voxel_size_)};
}

void VoxelBlockStore::insert(const TrainingPair& pair, Rng& rng) {
  const Vec3i v = voxel_of(pair.query);
  const uint64_t code = morton_encode(v);
  auto [it, fresh] = table_.try_emplace(code, static_cast<uint32_t>(blocks_.size()));
  if (fresh) blocks_.push_back({v, {}, 0});
  VoxelBlock& block = blocks_[it->second];
  if (cap_ == 0 || block.pairs.size() < cap_) {
    block.pairs.push_back(pair);
    ++total_;
  } else {
    // Reservoir sampling: the new pair survives with probability cap / (seen + 1).
    std::uniform_int_distribution<uint64_t> slot(0, block.seen);
    const uint64_t j = slot(rng);
    if (j < cap_) block.pairs[j] = pair;
  }
  ++block.seen;
}

void VoxelBlockStore::insert(std::span<const TrainingPair> pairs, Rng& rng) {
  for (const auto& p : pairs) insert(p, rng);
}

size_t VoxelBlockStore::evict_outside(const SlidingWindow& window) {
  size_t freed = 0;
  for (size_t i = 0; i < blocks_.size();) {
    if (window.contains(blocks_[i].voxel)) {
      ++i;
      continue;
    }
    freed += blocks_[i].pairs.size();
    table_.erase(morton_encode(blocks_[i].voxel));
    if (i + 1 != blocks_.size()) {
      blocks_[i] = std::move(blocks_.back());
      table_[morton_encode(blocks_[i].voxel)] = static_cast<uint32_t>(i);
    }
    blocks_.pop_back();
  }
  total_ -= freed;
  return freed;
}

const VoxelBlock* VoxelBlockStore::find(const Vec3i& voxel) const {
  const auto it = table_.find(morton_encode(voxel));
  return it == table_.end() ? nullptr : &blocks_[it->second];
}

int pairs_for_voxel(size_t available, const HierarchicalConfig& cfg) {
  if (available > static_cast<size_t>(cfg.threshold)) return cfg.n_per_voxel;
  return std::max(1, cfg.n_per_voxel / 3);
}

std::vector<TrainingPair> hierarchical_sample(const VoxelBlockStore& store, const SlidingWindow* window,
                                              const HierarchicalConfig& cfg, Rng& rng) {
  std::vector<uint32_t> candidates;
  candidates.reserve(store.voxel_count());
  for (uint32_t i = 0; i < store.blocks().size(); ++i) {
    const VoxelBlock& b = store.blocks()[i];
    if (b.pairs.empty()) continue;
    if (window && !window->contains(b.voxel)) continue;
    candidates.push_back(i);
  }
  const size_t chosen = std::min(candidates.size(), static_cast<size_t>(std::max(cfg.n_voxels, 0)));
  // partial Fisher-Yates: first `chosen` entries become a uniform sample without replacement
  for (size_t i = 0; i < chosen; ++i) {
    std::uniform_int_distribution<size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }

  std::vector<TrainingPair> batch;
  batch.reserve(chosen * static_cast<size_t>(std::max(cfg.n_per_voxel, 1)));
  std::vector<uint32_t> idx;
  for (size_t c = 0; c < chosen; ++c) {
    const auto& pairs = store.blocks()[candidates[c]].pairs;
    const auto want = static_cast<size_t>(pairs_for_voxel(pairs.size(), cfg));
    if (want <= pairs.size()) {
      // Floyd's algorithm: `want` distinct indices out of pairs.size()
      idx.clear();
      for (size_t j = pairs.size() - want; j < pairs.size(); ++j) {
        std::uniform_int_distribution<size_t> pick(0, j);
        const auto t = static_cast<uint32_t>(pick(rng));
        idx.push_back(std::find(idx.begin(), idx.end(), t) == idx.end() ? t : static_cast<uint32_t>(j));
      }
      for (uint32_t k : idx) batch.push_back(pairs[k]);
    } else {
      std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);
      for (size_t k = 0; k < want; ++k) batch.push_back(pairs[pick(rng)]);
    }
  }
  return batch;
}

std::vector<TrainingPair> random_sample(std::span<const TrainingPair* const> pool, size_t count, Rng& rng) {
  std::vector<TrainingPair> batch;
  if (pool.empty()) return batch;
  batch.reserve(count);
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  for (size_t k = 0; k < count; ++k) batch.push_back(*pool[pick(rng)]);
  return batch;
}

}  // namespace n3map
