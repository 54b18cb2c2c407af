#include "twinforge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "twinforge/mesh_query.hpp"

namespace twinforge {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
// Rays start this far behind their origin so that touching surfaces register
// as hits at distance ~0 instead of being skipped.
constexpr double kRayLift = 1e-5;
// Depth allowed while dropping and toppling; well below the reported 1 mm.
constexpr double kRestDepth = 1e-4;
const Vec3 kUp = Vec3::UnitZ();

/// Vertices, area samples and points along sharp edges, where an edge
/// pressed into a face would otherwise slip between area samples.
std::vector<Vec3> surface_points(const TriangleMesh& mesh, std::size_t samples) {
  constexpr double kEdgeSpacing = 1e-3;
  constexpr double kSharpDeg = 20.0;
  std::vector<Vec3> pts = unique_vertices(mesh);
  const PointCloud s = sample_mesh_surface(mesh, samples, 0);
  pts.insert(pts.end(), s.points.begin(), s.points.end());
  const std::vector<Vec3> edges = sharp_edge_points(mesh, kEdgeSpacing, kSharpDeg * M_PI / 180.0);
  pts.insert(pts.end(), edges.begin(), edges.end());
  return pts;
}

struct Obstacle {
  MeshQuery query;  // world frame
  std::vector<Vec3> points;
  bool closed = false;
};

struct Body {
  MeshQuery query;  // mesh frame
  std::vector<Vec3> points;
  Vec3 com = Vec3::Zero();
};

RigidPose rotate_about(const RigidPose& pose, const Vec3& point, const Vec3& axis, double angle) {
  const RigidPose r = RigidPose::from_axis_angle(axis, angle);
  return RigidPose::from_translation(point) * r * RigidPose::from_translation(-point) * pose;
}

RigidPose lowered(const RigidPose& pose, double d) {
  return RigidPose(pose.rotation, pose.translation - d * kUp);
}

class Settler {
 public:
  Settler(const Body& body, const std::vector<Obstacle>& obstacles, const SettleOptions& options)
      : body_(body), obstacles_(obstacles), options_(options) {}

  Aabb world_box(const RigidPose& pose) const {
    Aabb box = Aabb::empty_box();
    for (const auto& p : body_.points) box.expand(pose * p);
    return box;
  }

  /// True when any point is deeper than `tol` inside the ground, an
  /// obstacle, or (for obstacle points) the body.
  bool exceeds(const RigidPose& pose, double tol) const { return depth(pose, tol) > tol; }

  /// Deepest penetration; stops early once `stop_above` is exceeded.
  double depth(const RigidPose& pose, double stop_above = std::numeric_limits<double>::infinity()) const {
    double d = 0.0;
    const Aabb box = world_box(pose);
    d = std::max(d, -box.min.z());
    if (d > stop_above) return d;
    const RigidPose inv = pose.inverse();
    for (const auto& ob : obstacles_) {
      if (!overlaps(box, ob.query.bounds())) continue;
      if (ob.closed) {
        for (const auto& p : body_.points) {
          d = std::max(d, ob.query.penetration_depth(pose * p));
          if (d > stop_above) return d;
        }
      }
      for (const auto& q : ob.points) {
        if (!box.contains(q)) continue;
        d = std::max(d, body_.query.penetration_depth(inv * q));
        if (d > stop_above) return d;
      }
    }
    return d;
  }

  /// Free fall distance along -z before the first contact, by vertical rays.
  double drop_distance(const RigidPose& pose) const {
    double best = std::numeric_limits<double>::infinity();
    const Aabb box = world_box(pose);
    const RigidPose inv = pose.inverse();
    const Vec3 up_local = inv.rotation * kUp;
    for (const auto& p : body_.points) best = std::min(best, (pose * p).z());
    for (const auto& ob : obstacles_) {
      const Aabb& ob_box = ob.query.bounds();
      if (!overlaps_xy(box, ob_box) || ob_box.min.z() > box.max.z()) continue;
      for (const auto& p : body_.points) {
        const Vec3 w = pose * p;
        if (auto hit = ob.query.first_hit(w + kRayLift * kUp, -kUp, best + kRayLift)) {
          best = std::min(best, hit->distance - kRayLift);
        }
      }
      for (const auto& q : ob.points) {
        if (q.x() < box.min.x() || q.x() > box.max.x() || q.y() < box.min.y() || q.y() > box.max.y()) {
          continue;
        }
        if (auto hit = body_.query.first_hit(inv * (q - kRayLift * kUp), up_local, best + kRayLift)) {
          best = std::min(best, hit->distance - kRayLift);
        }
      }
    }
    return std::max(0.0, best);
  }

  RigidPose drop(const RigidPose& pose) const {
    const double d = drop_distance(pose);
    if (!exceeds(lowered(pose, d), kRestDepth)) return lowered(pose, d);
    // Rays can slip between sample points; fall back to bisection.
    double lo = 0.0, hi = d;
    while (hi - lo > options_.drop_resolution) {
      const double mid = 0.5 * (lo + hi);
      (exceeds(lowered(pose, mid), kRestDepth) ? hi : lo) = mid;
    }
    return lowered(pose, lo);
  }

  /// Points touching a surface below them, from the body and the obstacles.
  std::vector<Vec3> contacts(const RigidPose& pose, double tol) const {
    std::vector<Vec3> out;
    const Aabb box = world_box(pose);
    const RigidPose inv = pose.inverse();
    const Vec3 up_local = inv.rotation * kUp;
    for (const auto& p : body_.points) {
      const Vec3 w = pose * p;
      bool touching = w.z() <= tol;
      for (std::size_t i = 0; !touching && i < obstacles_.size(); ++i) {
        if (!obstacles_[i].query.bounds().contains(w, tol)) continue;
        touching = obstacles_[i].query.first_hit(w + kRayLift * kUp, -kUp, tol + kRayLift).has_value();
      }
      if (touching) out.push_back(w);
    }
    for (const auto& ob : obstacles_) {
      for (const auto& q : ob.points) {
        if (!box.contains(q, tol)) continue;
        if (body_.query.first_hit(inv * (q - kRayLift * kUp), up_local, tol + kRayLift)) out.push_back(q);
      }
    }
    return out;
  }

  Vec3 com(const RigidPose& pose) const { return pose * body_.com; }

 private:
  static bool overlaps_xy(const Aabb& a, const Aabb& b) {
    return a.min.x() <= b.max.x() && b.min.x() <= a.max.x() && a.min.y() <= b.max.y() &&
           b.min.y() <= a.max.y();
  }
  static bool overlaps(const Aabb& a, const Aabb& b) {
    return overlaps_xy(a, b) && a.min.z() <= b.max.z() && b.min.z() <= a.max.z();
  }

  const Body& body_;
  const std::vector<Obstacle>& obstacles_;
  const SettleOptions& options_;
};

std::vector<std::size_t> hull_indices(const std::vector<Eigen::Vector2d>& pts) {
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x() < pts[b].x() || (pts[a].x() == pts[b].x() && pts[a].y() < pts[b].y());
  });
  idx.erase(std::unique(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pts[a] == pts[b]; }),
            idx.end());
  if (idx.size() < 3) return idx;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    const Eigen::Vector2d u = pts[a] - pts[o], v = pts[b] - pts[o];
    return u.x() * v.y() - u.y() * v.x();
  };
  std::vector<std::size_t> h(2 * idx.size());
  std::size_t k = 0;
  for (std::size_t i : idx) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], i) <= 0.0) --k;
    h[k++] = i;
  }
  for (std::size_t j = idx.size() - 1, lower = k + 1; j-- > 0;) {
    const std::size_t i = idx[j];
    while (k >= lower && cross(h[k - 2], h[k - 1], i) <= 0.0) --k;
    h[k++] = i;
  }
  h.resize(k - 1);
  // All points collinear: keep the two extremes.
  if (h.size() < 3) return {idx.front(), idx.back()};
  return h;
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

Eigen::Vector2d xy(const Vec3& p) { return {p.x(), p.y()}; }

}  // namespace

std::string role_name(ObjectRole role) {
  switch (role) {
    case ObjectRole::manipulated: return "manipulated";
    case ObjectRole::interactive: return "interactive";
    case ObjectRole::fixed: return "static";
  }
  return "static";
}

ObjectRole parse_role(const std::string& name) {
  if (name == "manipulated") return ObjectRole::manipulated;
  if (name == "interactive") return ObjectRole::interactive;
  if (name == "static") return ObjectRole::fixed;
  throw InvalidInput("unknown object role: " + name);
}

void SceneTwin::validate() const {
  std::size_t manipulated = 0;
  for (const auto& o : objects) {
    if (o.role == ObjectRole::manipulated) ++manipulated;
    o.mesh.validate();
    o.material.validate();
  }
  if (manipulated != 1) throw InvalidInput("scene needs exactly one manipulated object");
  if (std::abs(gravity.x()) > 1e-12 || std::abs(gravity.y()) > 1e-12 || !(gravity.z() < 0.0)) {
    throw InvalidInput("gravity must point along -z");
  }
}

std::size_t SceneTwin::manipulated_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].role == ObjectRole::manipulated) return i;
  }
  throw InvalidInput("scene has no manipulated object");
}

std::size_t SceneTwin::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].name == name) return i;
  }
  throw InvalidInput("scene has no object named " + name);
}

Aabb SceneTwin::bounds(const std::vector<RigidPose>* poses) const {
  Aabb box = Aabb::empty_box();
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const RigidPose& pose = poses ? (*poses)[i] : objects[i].pose;
    for (const auto& v : objects[i].mesh.vertices) box.expand(pose * v);
  }
  return box;
}

std::vector<Vec3> unique_vertices(const TriangleMesh& mesh) {
  std::set<std::array<double, 3>> seen;
  std::vector<Vec3> out;
  for (const auto& v : mesh.vertices) {
    if (seen.insert({v.x(), v.y(), v.z()}).second) out.push_back(v);
  }
  return out;
}

std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points) {
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i : hull_indices(points)) out.push_back(points[i]);
  return out;
}

bool hull_contains(const std::vector<Eigen::Vector2d>& hull, const Eigen::Vector2d& p, double tol) {
  if (hull.empty()) return false;
  if (hull.size() == 1) return (p - hull[0]).norm() <= tol;
  if (hull.size() == 2) return segment_distance(p, hull[0], hull[1]) <= tol;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Eigen::Vector2d& a = hull[i];
    const Eigen::Vector2d& b = hull[(i + 1) % hull.size()];
    const Eigen::Vector2d e = b - a, v = p - a;
    // Signed distance to the left of edge a->b.
    if ((e.x() * v.y() - e.y() * v.x()) / e.norm() < -tol) return false;
  }
  return true;
}

RigidPose checker_viewpoint(const Aabb& scene_bounds, double standoff, double pitch_deg) {
  const double pitch = pitch_deg * kDegToRad;
  const Vec3 forward(0.0, std::cos(pitch), -std::sin(pitch));
  const Vec3 right = Vec3::UnitX();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return RigidPose(r, scene_bounds.center() - standoff * forward);
}

double penetration_depth_between(const TriangleMesh& a, const RigidPose& pose_a, const TriangleMesh& b,
                                 const RigidPose& pose_b, std::size_t samples) {
  const MeshQuery qa(transform_mesh(a, pose_a)), qb(transform_mesh(b, pose_b));
  double d = 0.0;
  for (const auto& p : surface_points(qa.mesh(), samples)) d = std::max(d, qb.penetration_depth(p));
  for (const auto& p : surface_points(qb.mesh(), samples)) d = std::max(d, qa.penetration_depth(p));
  return d;
}

SimOutcome settle_simulate(const SceneTwin& scene, const StrategySample& sample, const SettleOptions& options) {
  scene.validate();
  const std::size_t m = scene.manipulated_index();
  const TriangleMesh& mesh = scene.objects[m].mesh;
  if (!is_watertight(mesh)) throw SimulationError("manipulated mesh is not watertight");

  // Simulate with the sample above the origin; undo the shift at the end.
  const Vec3 shift(sample.object_pose.translation.x(), sample.object_pose.translation.y(), 0.0);
  const RigidPose to_local = RigidPose::from_translation(-shift);
  const RigidPose to_world = RigidPose::from_translation(shift);

  Body body{MeshQuery(mesh), surface_points(mesh, options.surface_samples),
            mass_properties(mesh).center_of_mass};
  std::vector<Obstacle> obstacles;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (i == m) continue;
    const TriangleMesh world = transform_mesh(scene.objects[i].mesh, to_local * scene.objects[i].pose);
    Obstacle ob{MeshQuery(world), surface_points(world, options.surface_samples), is_watertight(world)};
    obstacles.push_back(std::move(ob));
  }
  const Settler settler(body, obstacles, options);

  SimOutcome out;
  out.settled_poses.reserve(scene.objects.size());
  for (const auto& o : scene.objects) out.settled_poses.push_back(o.pose);

  RigidPose pose = to_local * sample.object_pose;
  out.initial_com_z = settler.com(pose).z();
  out.settled_com_z = out.initial_com_z;
  if (settler.depth(pose, options.penetration_tolerance) > options.penetration_tolerance) {
    out.penetration = true;
    out.stable = false;
    out.settled_poses[m] = sample.object_pose;
  } else {
    pose = settler.drop(pose);
    for (;;) {
      const Vec3 com = settler.com(pose);
      std::vector<Eigen::Vector2d> support;
      for (const auto& c : settler.contacts(pose, options.contact_tolerance)) support.push_back(xy(c));
      if (hull_contains(convex_hull_2d(support), xy(com))) {
        out.stable = true;
        break;
      }
      if (out.topple_steps >= options.max_topple_steps) break;
      // The pivot comes from the points actually touching; the looser
      // tolerance above would put it on a raised edge.
      const std::vector<Vec3> contacts = settler.contacts(pose, kRestDepth);
      std::vector<Eigen::Vector2d> flat;
      for (const auto& c : contacts) flat.push_back(xy(c));
      const std::vector<std::size_t> hull = hull_indices(flat);
      if (hull.empty()) break;

      // Pivot about the hull edge (or point) nearest the center of mass.
      Vec3 pivot = contacts[hull[0]], axis;
      if (hull.size() == 1) {
        axis = kUp.cross(com - pivot);
        axis.z() = 0.0;
      } else {
        double best = std::numeric_limits<double>::infinity();
        const std::size_t edges = hull.size() == 2 ? 1 : hull.size();
        for (std::size_t e = 0; e < edges; ++e) {
          const std::size_t a = hull[e], b = hull[(e + 1) % hull.size()];
          const double d = segment_distance(xy(com), flat[a], flat[b]);
          if (d < best) {
            best = d;
            pivot = contacts[a];
            axis = contacts[b] - contacts[a];
          }
        }
      }
      if (axis.norm() < 1e-12) break;
      axis.normalize();
      if (settler.com(rotate_about(pose, pivot, axis, 1e-3)).z() >
          settler.com(rotate_about(pose, pivot, -axis, 1e-3)).z()) {
        axis = -axis;
      }
      // Largest angle up to one step that stays clear of every surface.
      const double step = options.topple_step_deg * kDegToRad;
      double angle = step;
      if (settler.exceeds(rotate_about(pose, pivot, axis, step), kRestDepth)) {
        double lo = 0.0, hi = step;
        for (int it = 0; it < 14; ++it) {
          const double mid = 0.5 * (lo + hi);
          (settler.exceeds(rotate_about(pose, pivot, axis, mid), kRestDepth) ? hi : lo) = mid;
        }
        angle = lo;
      }
      ++out.topple_steps;
      if (angle < 1e-6) break;  // blocked
      pose = settler.drop(rotate_about(pose, pivot, axis, angle));
    }
    out.settled_com_z = settler.com(pose).z();
    out.settled_poses[m] = to_world * pose;
  }

  if (options.render) {
    std::vector<TriangleMesh> placed;
    std::vector<PosedMesh> posed;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      posed.push_back({&scene.objects[i].mesh, out.settled_poses[i]});
    }
    const RigidPose view = checker_viewpoint(scene.bounds(&out.settled_poses), options.checker_standoff);
    out.rendered = render_scene(posed, view, options.camera);
  }
  return out;
}

}  // namespace twinforge
