#include "n3map/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace n3map {
namespace {

constexpr uint32_t kLeafSize = 12;

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

struct KnnVisitor {
  size_t k;
  std::vector<KdTree::Neighbor> heap;  // max-heap under `closer`

  [[nodiscard]] double bound() const {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front().dist2;
  }
  void offer(uint32_t index, double d2) {
    const KdTree::Neighbor n{index, d2};
    if (heap.size() < k) {
      heap.push_back(n);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(n, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = n;
      std::push_heap(heap.begin(), heap.end(), closer);
    }
  }
};

}  // namespace

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("KdTree: empty point set");
  if (points_.size() >= std::numeric_limits<uint32_t>::max())
    throw std::invalid_argument("KdTree: too many points");
  order_.resize(points_.size());
  for (uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, static_cast<uint32_t>(order_.size()));
}

uint32_t KdTree::build(uint32_t begin, uint32_t end) {
  const auto id = static_cast<uint32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].left = begin;
    nodes_[id].right = end;
    return id;
  }
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Eigen::Index axis;
  (hi - lo).maxCoeff(&axis);
  const uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](uint32_t a, uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const uint32_t l = build(begin, mid);
  const uint32_t r = build(mid, end);
  nodes_[id].axis = static_cast<int32_t>(axis);
  nodes_[id].split = split;
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

template <typename Visit>
void KdTree::search(uint32_t node_id, const Vec3& q, Visit& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (uint32_t i = node.left; i < node.right; ++i) {
      const uint32_t idx = order_[i];
      visit.offer(idx, (points_[idx] - q).squaredNorm());
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const uint32_t near = diff < 0 ? node.left : node.right;
  const uint32_t far = diff < 0 ? node.right : node.left;
  search(near, q, visit);
  // <= keeps equal-distance candidates on the far side reachable for ties.
  if (diff * diff <= visit.bound()) search(far, q, visit);
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec3& query, size_t k) const {
  KnnVisitor visit{std::min(k, points_.size()), {}};
  if (visit.k == 0) return {};
  visit.heap.reserve(visit.k);
  search(0, query, visit);
  std::sort_heap(visit.heap.begin(), visit.heap.end(), closer);
  return std::move(visit.heap);
}

KdTree::Neighbor KdTree::nearest(const Vec3& query) const { return knn(query, 1).front(); }

}  // namespace n3map
