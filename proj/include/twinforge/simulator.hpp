#pragma once

// Scene twin and the built-in quasi-static settle simulator: place, drop along
// gravity, check the support polygon, topple over the nearest edge.

#include <string>
#include <vector>

#include "twinforge/material.hpp"
#include "twinforge/strategy.hpp"

namespace twinforge {

enum class ObjectRole { manipulated, interactive, fixed };

std::string role_name(ObjectRole role);
/// "manipulated", "interactive", or "static".
ObjectRole parse_role(const std::string& name);

struct SceneObject {
  std::string name;
  TriangleMesh mesh;
  /// World pose of the mesh frame.
  RigidPose pose;
  MaterialProps material;
  ObjectRole role = ObjectRole::fixed;
};

/// World frame is z-up; the ground plane z = 0 is always present.
struct SceneTwin {
  std::vector<SceneObject> objects;
  Vec3 gravity{0.0, 0.0, -9.81};

  /// Exactly one manipulated object, gravity along -z.
  void validate() const;
  std::size_t manipulated_index() const;
  std::size_t index_of(const std::string& name) const;
  /// World AABB with every object at `poses` (or the twin's own poses).
  Aabb bounds(const std::vector<RigidPose>* poses = nullptr) const;
};

class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

class Simulator {
 public:
  virtual ~Simulator() = default;
  /// Must be deterministic and safe to call concurrently.
  virtual SimOutcome simulate(const SceneTwin& scene, const StrategySample& sample) const = 0;
};

struct SettleOptions {
  double contact_tolerance = 1e-3;
  double drop_resolution = 5e-4;
  /// Initial placements deeper than this count as penetrating.
  double penetration_tolerance = 1e-3;
  double topple_step_deg = 15.0;
  int max_topple_steps = 6;
  std::size_t surface_samples = 400;
  bool render = true;
  CameraIntrinsics camera{140.0, 140.0, 80.0, 60.0, 160, 120};
  double checker_standoff = 0.8;
};

/// Camera-to-world pose `standoff` in front of (-y side of) the box center,
/// looking at it with the forward axis pitched `pitch_deg` below horizontal.
RigidPose checker_viewpoint(const Aabb& scene_bounds, double standoff = 0.8, double pitch_deg = 60.0);

/// Throws SimulationError when the manipulated mesh fails the parity test.
SimOutcome settle_simulate(const SceneTwin& scene, const StrategySample& sample,
                           const SettleOptions& options = {});

class SettleSimulator : public Simulator {
 public:
  explicit SettleSimulator(SettleOptions options = {}) : options_(std::move(options)) {}
  SimOutcome simulate(const SceneTwin& scene, const StrategySample& sample) const override {
    return settle_simulate(scene, sample, options_);
  }
  const SettleOptions& options() const { return options_; }

 private:
  SettleOptions options_;
};

/// Deepest point of either mesh inside the other (sampled surface plus
/// vertices, parity test), in meters.
double penetration_depth_between(const TriangleMesh& a, const RigidPose& pose_a,
                                 const TriangleMesh& b, const RigidPose& pose_b,
                                 std::size_t samples = 400);

/// Mesh vertices with exact duplicates removed, in first-seen order.
std::vector<Vec3> unique_vertices(const TriangleMesh& mesh);

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
std::vector<Eigen::Vector2d> convex_hull_2d(std::vector<Eigen::Vector2d> points);

/// Inside or within `tol` of the hull boundary; hulls of one or two points
/// are treated as a point or a segment.
bool hull_contains(const std::vector<Eigen::Vector2d>& hull, const Eigen::Vector2d& p, double tol = 1e-9);

}  // namespace twinforge
