#pragma once

// Candidate placements: translations near the interaction region, rotations
// from a yaw grid over a few rest orientations.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "twinforge/outcome.hpp"

namespace twinforge {

struct InteractionRegion {
  PointCloud cloud;
  Vec3 centroid = Vec3::Zero();
};

/// Back-projects the masked depth and maps it through `camera_to_world`.
/// Throws InvalidInput when no masked pixel has valid depth.
InteractionRegion interaction_region(const BinaryMask& mask, const DepthImage& depth,
                                     const CameraIntrinsics& intrinsics,
                                     const RigidPose& camera_to_world = RigidPose::identity());

struct StrategySample {
  /// World pose of the manipulated object's mesh frame.
  RigidPose object_pose;
  int sample_id = 0;
  std::optional<SimOutcome> outcome;
  std::optional<bool> weak_label;
  std::optional<double> success_prob;
  /// Why the label is negative; empty otherwise.
  std::string failure_reason;
};

using ReachabilityPredicate = std::function<bool(const RigidPose&)>;

/// Identity, rolls of +-90 degrees about x, 180 about x, and +-90 about y.
std::vector<Eigen::Quaterniond> default_rest_orientations();

/// In the workspace, and either tilted at most `max_tilt_deg` from upright or
/// within 5 degrees of the tilt of a rest orientation (any yaw).
bool builtin_reachability(const RigidPose& pose, const Aabb& workspace, double max_tilt_deg,
                          const std::vector<Eigen::Quaterniond>& rest = default_rest_orientations());

struct SamplingOptions {
  int n_rotations = 8;
  int n_offsets = 4;
  double offset_radius = 0.03;
  /// Gap left under the lowest vertex at the start pose.
  double clearance = 0.001;
  std::vector<Eigen::Quaterniond> rest_orientations = default_rest_orientations();
};

/// 2D Halton point (bases 2, 3) of index i.
Eigen::Vector2d halton2(std::size_t i);

/// For each offset, rest orientation and yaw step, a pose whose origin sits
/// at centroid + horizontal offset and whose lowest vertex (of `mesh`) is
/// `clearance` above the centroid height. Offsets are Halton points on the
/// disc of radius offset_radius, the first at the centroid; the seed only
/// rotates the pattern. Unreachable poses are dropped; ids are sequential
/// over the survivors.
std::vector<StrategySample> sample_strategies(const InteractionRegion& region, const TriangleMesh& mesh,
                                              const SamplingOptions& options,
                                              const ReachabilityPredicate& reach, std::uint64_t seed);

}  // namespace twinforge
