#include "twinforge/mesh_query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "twinforge/kdtree.hpp"
#include "twinforge/random.hpp"

namespace twinforge {

namespace {

constexpr std::size_t kLeafTriangles = 4;

bool ray_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double max_t) {
  double t0 = 0.0, t1 = max_t;
  for (int k = 0; k < 3; ++k) {
    double a = (box.min[k] - origin[k]) * inv_dir[k];
    double b = (box.max[k] - origin[k]) * inv_dir[k];
    if (a > b) std::swap(a, b);
    // NaN from 0 * inf means the origin lies on the slab plane; treat as inside.
    if (a == a) t0 = std::max(t0, a);
    if (b == b) t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

double box_squared_distance(const Aabb& box, const Vec3& p) {
  const Vec3 d = (box.min - p).cwiseMax(p - box.max).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

const Vec3 kParityDirs[3] = {Vec3(0.5773, 0.5774, 0.5775).normalized(),
                             Vec3(-0.2673, 0.8018, -0.5346).normalized(),
                             Vec3(0.7071, -0.1, 0.7).normalized()};

}  // namespace

std::optional<RayHit> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                         const Vec3& b, const Vec3& c) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kEps) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (t <= kEps) return std::nullopt;
  return RayHit{t, 0, u, v};
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Region classification (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

MeshQuery::MeshQuery(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  const std::size_t n = mesh_.triangles.size();
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  tri_boxes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Aabb box = Aabb::empty_box();
    for (int k = 0; k < 3; ++k) box.expand(mesh_.vertices[mesh_.triangles[i][k]]);
    tri_boxes_[i] = box;
  }
  bounds_ = mesh_.vertices.empty() ? Aabb{} : compute_aabb(mesh_.vertices);
  if (n > 0) {
    nodes_.reserve(2 * n / kLeafTriangles + 2);
    build(0, n);
  }
}

int MeshQuery::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{});
  Aabb box = Aabb::empty_box();
  for (std::size_t i = begin; i < end; ++i) {
    box.expand(tri_boxes_[order_[i]].min);
    box.expand(tri_boxes_[order_[i]].max);
  }
  nodes_[id].box = box;
  if (end - begin <= kLeafTriangles) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  box.extent().maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  auto key = [&](std::size_t t) { return tri_boxes_[t].min[axis] + tri_boxes_[t].max[axis]; };
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double ka = key(a), kb = key(b);
                     return ka < kb || (ka == kb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <typename Visit>
void MeshQuery::traverse_ray(const Vec3& origin, const Vec3& inv_dir, double max_t,
                             Visit&& visit) const {
  if (nodes_.empty()) return;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (!ray_box(n.box, origin, inv_dir, max_t)) continue;
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) visit(order_[i]);
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
}

std::optional<RayHit> MeshQuery::first_hit(const Vec3& origin, const Vec3& dir,
                                           double max_distance) const {
  const Vec3 inv = dir.cwiseInverse();
  std::optional<RayHit> best;
  traverse_ray(origin, inv, max_distance, [&](std::size_t t) {
    const auto& tri = mesh_.triangles[t];
    auto hit = intersect_triangle(origin, dir, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                                  mesh_.vertices[tri[2]]);
    if (!hit || hit->distance > max_distance) return;
    if (!best || hit->distance < best->distance ||
        (hit->distance == best->distance && t < best->triangle)) {
      hit->triangle = t;
      best = hit;
    }
  });
  return best;
}

int MeshQuery::count_hits(const Vec3& origin, const Vec3& dir) const {
  int count = 0;
  traverse_ray(origin, dir.cwiseInverse(), 1e30, [&](std::size_t t) {
    const auto& tri = mesh_.triangles[t];
    if (intersect_triangle(origin, dir, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                           mesh_.vertices[tri[2]])) {
      ++count;
    }
  });
  return count;
}

bool MeshQuery::contains(const Vec3& p) const {
  if (!bounds_.contains(p)) return false;
  int votes = 0;
  for (const auto& d : kParityDirs) votes += count_hits(p, d) % 2;
  return votes >= 2;
}

double MeshQuery::distance(const Vec3& p) const {
  if (nodes_.empty()) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_squared_distance(n.box, p) >= best) continue;
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const auto& tri = mesh_.triangles[order_[i]];
        const Vec3 c = closest_point_on_triangle(p, mesh_.vertices[tri[0]],
                                                 mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        best = std::min(best, (c - p).squaredNorm());
      }
    } else {
      // Visit the nearer child last so it is popped first.
      const double dl = box_squared_distance(nodes_[n.left].box, p);
      const double dr = box_squared_distance(nodes_[n.right].box, p);
      if (dl < dr) {
        stack[top++] = n.right;
        stack[top++] = n.left;
      } else {
        stack[top++] = n.left;
        stack[top++] = n.right;
      }
    }
  }
  return std::sqrt(best);
}

double MeshQuery::penetration_depth(const Vec3& p) const {
  return contains(p) ? distance(p) : 0.0;
}

std::vector<std::size_t> weld_vertices(const TriangleMesh& mesh, double tolerance) {
  const KdTree tree(mesh.vertices);
  std::vector<std::size_t> rep(mesh.vertices.size());
  for (std::size_t i = 0; i < rep.size(); ++i) {
    rep[i] = i;
    for (const auto& n : tree.radius_search(mesh.vertices[i], tolerance)) {
      if (n.index < i) rep[i] = std::min(rep[i], rep[n.index]);
    }
  }
  return rep;
}

namespace {

constexpr double kWeld = 1e-9;

/// Welded undirected edge -> triangles using it.
std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> edge_map(const TriangleMesh& mesh) {
  const std::vector<std::size_t> rep = weld_vertices(mesh, kWeld);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> edges;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const std::size_t a = rep[tri[k]], b = rep[tri[(k + 1) % 3]];
      if (a != b) edges[{std::min(a, b), std::max(a, b)}].push_back(t);
    }
  }
  return edges;
}

bool edges_closed(const TriangleMesh& mesh) {
  const auto edges = edge_map(mesh);
  return std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second.size() % 2 == 0; });
}

}  // namespace

std::vector<Vec3> sharp_edge_points(const TriangleMesh& mesh, double spacing, double min_angle_rad) {
  if (!(spacing > 0.0)) throw InvalidInput("sharp_edge_points: spacing must be positive");
  std::vector<Vec3> out;
  const double cos_limit = std::cos(min_angle_rad);
  for (const auto& [edge, tris] : edge_map(mesh)) {
    bool sharp = tris.size() != 2;
    if (!sharp) sharp = mesh.triangle_normal(tris[0]).dot(mesh.triangle_normal(tris[1])) < cos_limit;
    if (!sharp) continue;
    const Vec3 a = mesh.vertices[edge.first], b = mesh.vertices[edge.second];
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
    // Interior points only; the endpoints are mesh vertices.
    for (int i = 1; i < steps; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / steps));
  }
  return out;
}

bool is_watertight(const TriangleMesh& mesh, int rays, std::uint64_t seed) {
  if (mesh.empty() || !edges_closed(mesh)) return false;
  const MeshQuery query(mesh);
  const Aabb box = query.bounds();
  const double radius = box.extent().norm() + 1.0;
  Rng rng(seed);
  for (int i = 0; i < rays; ++i) {
    // Full line through a random interior point: both ends outside the mesh,
    // so a closed surface is crossed an even number of times.
    const Vec3 target(rng.uniform(box.min.x(), box.max.x()), rng.uniform(box.min.y(), box.max.y()),
                      rng.uniform(box.min.z(), box.max.z()));
    const Vec3 dir = rng.unit_vector();
    const Vec3 origin = target - radius * dir;
    if (query.count_hits(origin, dir) % 2 != 0) return false;
  }
  return true;
}

double point_mesh_distance_brute(const Vec3& p, const TriangleMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles) {
    const Vec3 c =
        closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    best = std::min(best, (c - p).norm());
  }
  return best;
}

}  // namespace twinforge
