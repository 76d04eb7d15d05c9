#include "n3map/mapper.hpp"

#include <cmath>

#include "n3map/errors.hpp"

namespace n3map {

AdamOptimizer::AdamOptimizer(const AdamConfig& cfg)
    : cfg_(cfg),
      m_dec_(Eigen::VectorXd::Zero(MlpDecoder::kParamCount)),
      v_dec_(Eigen::VectorXd::Zero(MlpDecoder::kParamCount)) {}

void AdamOptimizer::step(ImplicitMap& map, const Gradients& grads) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  const double lr = cfg_.learning_rate;

  if (!map.decoder().frozen()) {
    Eigen::VectorXd& p = map.decoder().params();
    m_dec_ = cfg_.beta1 * m_dec_ + (1.0 - cfg_.beta1) * grads.decoder;
    v_dec_ = cfg_.beta2 * v_dec_ + (1.0 - cfg_.beta2) * grads.decoder.cwiseAbs2();
    p.array() -= lr * (m_dec_.array() / bc1) / ((v_dec_.array() / bc2).sqrt() + cfg_.epsilon);
  }

  auto& features = map.grid().features();
  if (m_feat_.size() < features.size()) {
    m_feat_.resize(features.size(), Feature::Zero());
    v_feat_.resize(features.size(), Feature::Zero());
  }
  for (uint32_t i : grads.touched) {
    const Feature& g = grads.features[i];
    m_feat_[i] = cfg_.beta1 * m_feat_[i] + (1.0 - cfg_.beta1) * g;
    v_feat_[i] = cfg_.beta2 * v_feat_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    features[i].array() -= lr * (m_feat_[i].array() / bc1) / ((v_feat_[i].array() / bc2).sqrt() + cfg_.epsilon);
  }
}

const char* to_string(WindowMode m) {
  switch (m) {
    case WindowMode::kVoxel: return "voxel";
    case WindowMode::kKeyframe: return "keyframe";
    case WindowMode::kReplay: return "replay";
  }
  return "?";
}

const char* to_string(BatchSampling m) {
  return m == BatchSampling::kHierarchical ? "hierarchical" : "random";
}

WindowMode parse_window_mode(const std::string& s) {
  if (s == "voxel") return WindowMode::kVoxel;
  if (s == "keyframe") return WindowMode::kKeyframe;
  if (s == "replay") return WindowMode::kReplay;
  throw ConfigError("unknown window mode '" + s + "'");
}

BatchSampling parse_batch_sampling(const std::string& s) {
  if (s == "hierarchical") return BatchSampling::kHierarchical;
  if (s == "random") return BatchSampling::kRandom;
  throw ConfigError("unknown sampling mode '" + s + "'");
}

void MapperConfig::validate() const {
  sampler.validate();
  loss.validate();
  if (!(map.leaf_size > 0)) throw ConfigError("leaf voxel size must be positive");
  if (map.levels < 1 || map.levels > kMaxLevels) throw ConfigError("levels must be in [1, 6]");
  if (train.iters < 0) throw ConfigError("iterations must be non-negative");
  if (train.hierarchical.n_voxels < 1 || train.hierarchical.n_per_voxel < 1 || train.hierarchical.threshold < 0)
    throw ConfigError("hierarchical sampling counts must be positive");
  if (!(train.window_range > 0)) throw ConfigError("window range must be positive");
  if (train.keyframes < 1) throw ConfigError("keyframe count must be positive");
  if (!(train.adam.learning_rate > 0)) throw ConfigError("learning rate must be positive");
}

Mapper::Mapper(const MapperConfig& cfg)
    : cfg_(cfg),
      map_(cfg.map, cfg.seed),
      optimizer_(cfg.train.adam),
      rng_(point_rng(cfg.seed, -3, 0)),
      store_(cfg.map.leaf_size, cfg.train.voxel_cap),
      scratch_store_(cfg.map.leaf_size, 0) {
  cfg_.validate();
}

size_t Mapper::stored_pairs() const {
  return cfg_.train.window_mode == WindowMode::kVoxel ? store_.total_pairs() : frame_pair_total_;
}

std::vector<TrainingPair> Mapper::draw_batch() {
  const TrainConfig& t = cfg_.train;
  if (t.sampling == BatchSampling::kRandom) return random_sample(flat_pool_, t.random_batch_size(), rng_);
  if (t.window_mode == WindowMode::kVoxel) return hierarchical_sample(store_, &window_, t.hierarchical, rng_);
  return hierarchical_sample(scratch_store_, nullptr, t.hierarchical, rng_);
}

FrameReport Mapper::integrate(const ScanFrame& frame) {
  FrameReport report;
  report.frame_index = frame.frame_index;
  if (frame.size() == 0) {
    report.stored_pairs = stored_pairs();
    report.decoder_frozen = map_.decoder().frozen();
    return report;
  }
  const TrainConfig& t = cfg_.train;

  std::vector<TrainingPair> pairs = generate_pairs(frame, cfg_.sampler, cfg_.seed, &report.pair_stats);
  report.new_leaves = map_.allocate(frame.points, cfg_.allocation_radius());
  // Free-space samples far from any surface have no features to supervise.
  std::erase_if(pairs, [&](const TrainingPair& p) {
    const bool outside = !map_.grid().contains(p.query);
    report.pairs_outside_map += outside;
    return outside;
  });

  switch (t.window_mode) {
    case WindowMode::kVoxel: {
      window_ = update_window(frame.sensor_origin, t.window_range, cfg_.map.leaf_size);
      report.evicted_pairs = store_.evict_outside(window_);
      for (const auto& p : pairs) {
        if (window_.contains(store_.voxel_of(p.query))) store_.insert(p, rng_);
        else ++report.pairs_outside_window;
      }
      if (t.sampling == BatchSampling::kRandom) {
        flat_pool_.clear();
        for (const auto& b : store_.blocks())
          for (const auto& p : b.pairs) flat_pool_.push_back(&p);
      }
      break;
    }
    case WindowMode::kKeyframe:
    case WindowMode::kReplay: {
      frame_pair_total_ += pairs.size();
      frame_pairs_.push_back(std::move(pairs));
      if (t.window_mode == WindowMode::kKeyframe) {
        while (frame_pairs_.size() > static_cast<size_t>(t.keyframes)) {
          report.evicted_pairs += frame_pairs_.front().size();
          frame_pair_total_ -= frame_pairs_.front().size();
          frame_pairs_.pop_front();
        }
      }
      if (t.sampling == BatchSampling::kRandom) {
        flat_pool_.clear();
        for (const auto& fp : frame_pairs_)
          for (const auto& p : fp) flat_pool_.push_back(&p);
      } else if (t.window_mode == WindowMode::kKeyframe) {
        scratch_store_ = VoxelBlockStore(cfg_.map.leaf_size, 0);
        for (const auto& fp : frame_pairs_) scratch_store_.insert(fp, rng_);
      } else {
        scratch_store_.insert(frame_pairs_.back(), rng_);
      }
      break;
    }
  }

  report.trace.reserve(t.iters);
  for (int it = 0; it < t.iters; ++it) {
    const std::vector<TrainingPair> batch = draw_batch();
    if (batch.empty()) break;
    grads_.clear();
    report.trace.push_back(map_.forward_backward(batch, cfg_.loss, &grads_));
    optimizer_.step(map_, grads_);
  }

  ++frames_;
  if (t.freeze_after > 0 && frames_ >= t.freeze_after) map_.freeze_decoder();
  report.stored_pairs = stored_pairs();
  report.decoder_frozen = map_.decoder().frozen();
  return report;
}

}  // namespace n3map
