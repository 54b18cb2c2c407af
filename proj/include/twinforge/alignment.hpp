#pragma once

// Mesh-to-observation alignment: the coarse-to-fine pipeline (render-and-compare
// rotation search, bounding-box scale, FPFH RANSAC, ICP) and the direct
// RANSAC+ICP baseline it is benchmarked against.

#include <optional>
#include <string>

#include "twinforge/coarse_align.hpp"
#include "twinforge/registration.hpp"

namespace twinforge {

/// One RGB-D view with the segmentation mask of the object to align.
struct Observation {
  ColorImage rgb;
  DepthImage depth;
  BinaryMask mask;
  CameraIntrinsics intrinsics;
};

struct AlignmentConfig {
  std::size_t rotation_count = 72;
  std::uint64_t seed = 0;
  CoarseAlignOptions coarse;
  /// Local hill-climb after the hypothesis search; starts = 0 disables it.
  CoarseRefineOptions coarse_refine;
  /// Translation updates that move the coarse render's visible centroid onto
  /// the observed centroid.
  int coarse_centering_steps = 3;
  bool estimate_scale = true;
  /// The depth extent of a single-view partial jumps when a small rotation
  /// error exposes an edge-on face; take the camera-z scale from the mean of
  /// the image-plane axes instead.
  bool depth_scale_from_image_axes = true;
  /// Scale, RANSAC and ICP passes; later passes scale from the previous
  /// registered pose and are kept when their RMSE is no worse.
  int scale_passes = 2;
  /// Voxel sizes for descriptor matching and for ICP.
  double feature_voxel = 0.005;
  double icp_voxel = 0.002;
  std::size_t normal_k = 15;
  /// FPFH radius as a multiple of the target's mean nearest-neighbor spacing.
  double fpfh_radius_factor = 5.0;
  RansacParams ransac = [] {
    RansacParams p;
    p.min_mutual = 30;
    return p;
  }();
  /// Two-stage only: RANSAC models may rotate the coarse estimate by at most
  /// this much.
  double refine_max_rotation_deg = 60.0;
  IcpParams icp;
  std::size_t min_mask_pixels = 100;
};

struct StageFailure {
  std::string stage;
  std::string reason;
};

struct AlignmentResult {
  std::optional<StageFailure> failure;
  /// Mesh with the scale estimate applied, in the mesh's own frame.
  TriangleMesh scaled_mesh;
  /// Maps scaled_mesh into the camera frame.
  RigidPose pose;
  CoarseAlignment coarse;
  /// Coarse estimate after local refinement, and its similarity.
  RigidPose coarse_pose;
  double coarse_similarity = -1.0;
  /// Back-projected render of the refined coarse pose, camera frame.
  PointCloud coarse_partial;
  ScaleEstimate scale;
  RegistrationResult ransac;
  /// Final ICP result; rmse is over the final ICP correspondences.
  RegistrationResult registration;

  bool ok() const { return !failure.has_value(); }
};

/// Observed partial cloud (camera frame) under the mask.
PointCloud observed_partial(const Observation& obs);

/// Scales `mesh` so that, posed at `pose`, it is stretched by `per_axis` along
/// the camera axes about the camera-frame point `center`.
TriangleMesh scale_mesh_in_camera(const TriangleMesh& mesh, const RigidPose& pose,
                                  const Vec3& per_axis, const Vec3& center);

/// Hypothesis search and local refinement only; fills the coarse fields.
AlignmentResult coarse_align_stage(const TriangleMesh& mesh, const Observation& obs,
                                   const AlignmentConfig& config = {},
                                   const ViewFeatureExtractor& extractor = GridDescriptor{});

/// Scale estimate, RANSAC and ICP from a successful coarse stage.
void fine_register_stage(const TriangleMesh& mesh, const Observation& obs, const AlignmentConfig& config,
                         AlignmentResult& result);

/// coarse_align_stage followed by fine_register_stage.
AlignmentResult two_stage_align(const TriangleMesh& mesh, const Observation& obs,
                                const AlignmentConfig& config = {},
                                const ViewFeatureExtractor& extractor = GridDescriptor{});

/// Baseline without the coarse stage: the whole mesh surface, unrotated and
/// centered on the observed cloud, registered to the observation by RANSAC
/// and ICP.
AlignmentResult direct_align(const TriangleMesh& mesh, const Observation& obs,
                             const AlignmentConfig& config = {});

/// Rotation error <= 15 degrees and translation error <= max(0.01, 0.1 * diameter).
bool alignment_success(const RigidPose& estimated, const RigidPose& truth, double object_diameter);

}  // namespace twinforge
