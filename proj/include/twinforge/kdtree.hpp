#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "twinforge/geometry.hpp"

namespace twinforge {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Exact k-d tree over a fixed point set. Build once; queries are const and
/// safe to run concurrently.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points);
  explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points) {}

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// Throws InvalidInput on an empty tree. Ties resolve to the lowest index.
  Neighbor nearest(const Vec3& query) const;
  /// Up to k neighbors sorted by distance, then index.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  /// All points within `radius` (inclusive), sorted by index.
  std::vector<Neighbor> radius_search(const Vec3& query, double radius) const;

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end, int depth);
  void nearest_impl(int node, const Vec3& q, Neighbor& best) const;
  void knn_impl(int node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;
  void radius_impl(int node, const Vec3& q, double r2, std::vector<Neighbor>& out) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Distance from `query` to the closest indexed point.
double nearest_distance(const Vec3& query, const KdTree& index);

}  // namespace twinforge
