#pragma once

#include <cstdint>
#include <vector>

#include "n3map/types.hpp"

namespace n3map {

// Static 3-d tree over a point set. Immutable after construction, so
// concurrent queries are safe.
class KdTree {
 public:
  struct Neighbor {
    uint32_t index;
    double dist2;
  };

  // Throws std::invalid_argument for an empty point set.
  explicit KdTree(std::vector<Vec3> points);

  // min(k, size()) neighbours sorted by (distance, index).
  [[nodiscard]] std::vector<Neighbor> knn(const Vec3& query, size_t k) const;
  [[nodiscard]] Neighbor nearest(const Vec3& query) const;

  [[nodiscard]] size_t size() const { return points_.size(); }
  [[nodiscard]] const Vec3& point(size_t i) const { return points_[i]; }
  [[nodiscard]] const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    double split = 0.0;
    int32_t axis = -1;  // -1 marks a leaf
    uint32_t left = 0, right = 0;  // children, or [begin, end) into order_ for leaves
  };

  uint32_t build(uint32_t begin, uint32_t end);
  template <typename Visit>
  void search(uint32_t node, const Vec3& q, Visit& visit) const;

  std::vector<Vec3> points_;
  std::vector<uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace n3map
