#pragma once

#include <optional>
#include <vector>

#include "twinforge/geometry.hpp"

namespace twinforge {

struct RayHit {
  double distance = 0.0;
  std::size_t triangle = 0;
  double u = 0.0;  // barycentric weight of vertex 1
  double v = 0.0;  // barycentric weight of vertex 2
};

/// Moller-Trumbore intersection; returns the ray parameter t > eps.
std::optional<RayHit> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                         const Vec3& b, const Vec3& c);

/// Closest point on triangle abc to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding-volume hierarchy over a mesh's triangles in the mesh's own frame.
class MeshQuery {
 public:
  explicit MeshQuery(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  const Aabb& bounds() const { return bounds_; }

  std::optional<RayHit> first_hit(const Vec3& origin, const Vec3& dir,
                                  double max_distance = 1e30) const;
  /// Number of surface crossings along the ray.
  int count_hits(const Vec3& origin, const Vec3& dir) const;
  /// Ray-parity inside test with a fixed off-axis direction; majority vote over
  /// three directions guards against grazing hits on shared edges.
  bool contains(const Vec3& p) const;
  double distance(const Vec3& p) const;
  /// Positive distance to the surface when inside, 0 otherwise.
  double penetration_depth(const Vec3& p) const;

 private:
  struct Node {
    Aabb box;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end);
  template <typename Visit>
  void traverse_ray(const Vec3& origin, const Vec3& inv_dir, double max_t, Visit&& visit) const;

  TriangleMesh mesh_;
  Aabb bounds_;
  std::vector<std::size_t> order_;
  std::vector<Aabb> tri_boxes_;
  std::vector<Node> nodes_;
};

/// Representative (lowest) index of each vertex after merging vertices within
/// `tolerance` of each other.
std::vector<std::size_t> weld_vertices(const TriangleMesh& mesh, double tolerance);

/// Points every `spacing` along edges whose adjacent faces meet at more than
/// `min_angle_rad`, and along boundary edges; endpoints excluded.
std::vector<Vec3> sharp_edge_points(const TriangleMesh& mesh, double spacing, double min_angle_rad);

/// Every edge (after welding coincident vertices) is shared by an even number
/// of triangles, and random lines through the bounds cross the surface an
/// even number of times.
bool is_watertight(const TriangleMesh& mesh, int rays = 100, std::uint64_t seed = 0);

/// Minimum distance from p to any triangle, by linear scan.
double point_mesh_distance_brute(const Vec3& p, const TriangleMesh& mesh);

}  // namespace twinforge
