#include "twinforge/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace twinforge {

namespace {

constexpr std::size_t kLeafSize = 8;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size(), 0);
  }
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{});
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  // Split on the widest axis of this node's bounding box.
  Aabb box = Aabb::empty_box();
  for (std::size_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
  int axis = 0;
  box.extent().maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::nearest_impl(int node, const Vec3& q, Neighbor& best) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (closer(cand, best)) best = cand;
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int first = diff < 0.0 ? n.left : n.right;
  const int second = diff < 0.0 ? n.right : n.left;
  nearest_impl(first, q, best);
  // <= keeps equal-distance points on the far side reachable for tie-breaking.
  if (diff * diff <= best.squared_distance) nearest_impl(second, q, best);
}

Neighbor KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw InvalidInput("nearest neighbor query on an empty index");
  Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  nearest_impl(0, query, best);
  return best;
}

void KdTree::knn_impl(int node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const int first = diff < 0.0 ? n.left : n.right;
  const int second = diff < 0.0 ? n.right : n.left;
  knn_impl(first, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().squared_distance) {
    knn_impl(second, q, k, heap);
  }
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> heap;
  if (points_.empty() || k == 0) return heap;
  heap.reserve(k + 1);
  knn_impl(0, query, k, heap);
  std::sort(heap.begin(), heap.end(), closer);
  return heap;
}

void KdTree::radius_impl(int node, const Vec3& q, double r2, std::vector<Neighbor>& out) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const double d2 = (points_[order_[i]] - q).squaredNorm();
      if (d2 <= r2) out.push_back({order_[i], d2});
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  if (diff <= 0.0 || diff * diff <= r2) radius_impl(n.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius_impl(n.right, q, r2, out);
}

std::vector<Neighbor> KdTree::radius_search(const Vec3& query, double radius) const {
  std::vector<Neighbor> out;
  if (points_.empty()) return out;
  radius_impl(0, query, radius * radius, out);
  std::sort(out.begin(), out.end(),
            [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
  return out;
}

double nearest_distance(const Vec3& query, const KdTree& index) {
  return std::sqrt(index.nearest(query).squared_distance);
}

}  // namespace twinforge
