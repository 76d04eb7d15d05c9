#include "n3map/feature_grid.hpp"

#include <cmath>
#include <stdexcept>

#include "n3map/errors.hpp"

namespace n3map {
namespace {

int64_t floor_div(int64_t a, int64_t b) {
  const int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

bool in_range(const Vec3i& c) {
  return (c.array().abs() < kMortonCoordLimit - 8).all();
}

}  // namespace

FeatureGrid::FeatureGrid(double leaf_size, int levels)
    : leaf_size_(leaf_size), levels_(levels), vertex_index_(levels) {
  if (!(leaf_size > 0)) throw ConfigError("leaf voxel size must be positive");
  if (levels < 1 || levels > kMaxLevels) throw ConfigError("level count must be in [1, 6]");
}

Vec3i FeatureGrid::leaf_of(const Vec3& x) const {
  const Vec3 g = x / leaf_size_;
  return {static_cast<int64_t>(std::floor(g.x())), static_cast<int64_t>(std::floor(g.y())),
          static_cast<int64_t>(std::floor(g.z()))};
}

bool FeatureGrid::leaf_allocated(const Vec3i& leaf) const {
  if (!in_range(leaf)) return false;
  return leaf_index_.contains(morton_encode_unchecked(leaf.x(), leaf.y(), leaf.z()));
}

uint32_t FeatureGrid::vertex(int level, const Vec3i& v, Rng* rng, double init_scale) {
  const uint64_t code = morton_encode_unchecked(v.x(), v.y(), v.z());
  auto& index = vertex_index_[level];
  if (auto it = index.find(code); it != index.end()) return it->second;
  Feature f = Feature::Zero();
  if (rng) {
    std::uniform_real_distribution<double> u(-init_scale, init_scale);
    for (int i = 0; i < kFeatureDim; ++i) f[i] = u(*rng);
  }
  const auto id = static_cast<uint32_t>(features_.size());
  features_.push_back(f);
  vertex_keys_.push_back({code, static_cast<uint8_t>(level)});
  index.emplace(code, id);
  return id;
}

void FeatureGrid::add_leaf(const Vec3i& leaf, Rng* rng, double init_scale) {
  const uint64_t code = morton_encode_unchecked(leaf.x(), leaf.y(), leaf.z());
  leaf_index_.emplace(code, static_cast<uint32_t>(leaves_.size()));
  leaves_.push_back(leaf);
  for (int l = 0; l < levels_; ++l) {
    const int64_t scale = int64_t{1} << l;
    const Vec3i base(floor_div(leaf.x(), scale), floor_div(leaf.y(), scale), floor_div(leaf.z(), scale));
    for (int c = 0; c < 8; ++c) {
      const Vec3i corner = base + Vec3i(c & 1, (c >> 1) & 1, (c >> 2) & 1);
      leaf_corners_.push_back(vertex(l, corner, rng, init_scale));
    }
  }
}

size_t FeatureGrid::allocate(std::span<const Vec3> points, double radius, Rng& rng, double init_scale) {
  size_t added = 0;
  const double r2 = radius * radius;
  for (const Vec3& p : points) {
    const Vec3i lo = leaf_of(p - Vec3::Constant(radius));
    const Vec3i hi = leaf_of(p + Vec3::Constant(radius));
    for (int64_t x = lo.x(); x <= hi.x(); ++x) {
      for (int64_t y = lo.y(); y <= hi.y(); ++y) {
        for (int64_t z = lo.z(); z <= hi.z(); ++z) {
          const Vec3i leaf(x, y, z);
          const Vec3 center = (leaf.cast<double>() + Vec3::Constant(0.5)) * leaf_size_;
          if ((center - p).squaredNorm() > r2) continue;
          if (!in_range(leaf)) throw std::out_of_range("feature grid: point outside the representable world");
          if (leaf_index_.contains(morton_encode_unchecked(x, y, z))) continue;
          add_leaf(leaf, &rng, init_scale);
          ++added;
        }
      }
    }
  }
  return added;
}

bool FeatureGrid::stencil(const Vec3& x, CornerStencil& out) const {
  const Vec3 g = x / leaf_size_;
  const Vec3i leaf(static_cast<int64_t>(std::floor(g.x())), static_cast<int64_t>(std::floor(g.y())),
                   static_cast<int64_t>(std::floor(g.z())));
  if (!in_range(leaf)) return false;
  const auto it = leaf_index_.find(morton_encode_unchecked(leaf.x(), leaf.y(), leaf.z()));
  if (it == leaf_index_.end()) return false;
  const uint32_t* corners = &leaf_corners_[static_cast<size_t>(it->second) * 8 * levels_];
  out.levels = levels_;
  for (int l = 0; l < levels_; ++l) {
    const int64_t scale = int64_t{1} << l;
    const double inv = 1.0 / static_cast<double>(scale);
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double base = static_cast<double>(floor_div(leaf[a], scale) * scale);
      frac[a] = (g[a] - base) * inv;
    }
    for (int c = 0; c < 8; ++c) {
      const double wx = (c & 1) ? frac[0] : 1.0 - frac[0];
      const double wy = (c & 2) ? frac[1] : 1.0 - frac[1];
      const double wz = (c & 4) ? frac[2] : 1.0 - frac[2];
      out.index[8 * l + c] = corners[8 * l + c];
      out.weight[8 * l + c] = wx * wy * wz;
    }
  }
  return true;
}

Feature FeatureGrid::interpolate(const CornerStencil& s) const {
  Feature f = Feature::Zero();
  for (int i = 0; i < s.size(); ++i) f.noalias() += s.weight[i] * features_[s.index[i]];
  return f;
}

Feature FeatureGrid::query_feature(const Vec3& x) const {
  CornerStencil s;
  if (!stencil(x, s)) throw OutOfMapError("query outside allocated map");
  return interpolate(s);
}

void FeatureGrid::restore(std::vector<MortonKey> vertex_keys, std::vector<Feature> features,
                          const std::vector<Vec3i>& leaves) {
  if (vertex_keys.size() != features.size()) throw FormatError("feature grid: key/feature count mismatch");
  vertex_index_.assign(levels_, {});
  leaf_index_.clear();
  leaves_.clear();
  leaf_corners_.clear();
  for (size_t i = 0; i < vertex_keys.size(); ++i) {
    if (vertex_keys[i].level >= levels_) throw FormatError("feature grid: vertex level out of range");
    if (!vertex_index_[vertex_keys[i].level].emplace(vertex_keys[i].code, static_cast<uint32_t>(i)).second)
      throw FormatError("feature grid: duplicate vertex");
  }
  vertex_keys_ = std::move(vertex_keys);
  features_ = std::move(features);
  const size_t before = features_.size();
  for (const Vec3i& leaf : leaves) {
    if (!in_range(leaf)) throw FormatError("feature grid: leaf out of range");
    if (leaf_allocated(leaf)) throw FormatError("feature grid: duplicate leaf");
    add_leaf(leaf, nullptr, 0.0);
  }
  if (features_.size() != before) throw FormatError("feature grid: leaf references missing vertices");
}

}  // namespace n3map
