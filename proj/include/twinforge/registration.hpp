#pragma once

// Point-cloud registration primitives: bounding-box scale estimation, PCA
// normals, FPFH descriptors, correspondence RANSAC, and point-to-point ICP.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "twinforge/geometry.hpp"
#include "twinforge/kdtree.hpp"

namespace twinforge {

struct ScaleEstimate {
  Vec3 per_axis = Vec3::Ones();
  double uniform = 1.0;
};

inline constexpr double kMinScale = 0.2;
inline constexpr double kMaxScale = 5.0;

/// Ratio of observed to rendered AABB extents per camera axis. Axes whose
/// rendered extent is below 1e-4 m take the median ratio of the others;
/// everything is clamped to [kMinScale, kMaxScale].
ScaleEstimate estimate_scale(const PointCloud& rendered_partial, const PointCloud& observed_partial);

struct NormalEstimate {
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> valid;
  std::size_t valid_count() const;
};

/// Lowest-variance axis of each point's k-NN covariance (the point itself
/// included), flipped to face the camera origin. Neighborhoods of rank < 2 are
/// flagged invalid.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k = 15);

/// Eigen-decomposition of a neighborhood covariance; eigenvalues ascending.
struct CovarianceEigen {
  Vec3 eigenvalues;
  Mat3 eigenvectors;  // columns
};
CovarianceEigen neighborhood_eigen(const std::vector<Vec3>& points);

using FpfhDescriptor = std::array<double, 33>;

/// Mean distance from each point to its nearest neighbor.
double mean_nn_spacing(const PointCloud& cloud);

/// Two-pass FPFH: an 11x3-bin simplified histogram per point over the
/// neighbors within `radius`, then the distance-weighted neighbor aggregate;
/// L1-normalized. Points with invalid normals or no neighbors get zeros.
std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud, const NormalEstimate& normals,
                                         double radius);

/// Darboux-frame pair angles (theta, alpha, phi) and distance between two
/// oriented points, in the ordering used for FPFH binning.
std::array<double, 4> pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

double descriptor_l1(const FpfhDescriptor& a, const FpfhDescriptor& b);

/// Least-squares rigid transform mapping src[i] onto dst[i] (Kabsch).
RigidPose kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

struct RegistrationResult {
  RigidPose pose;
  double rmse = std::numeric_limits<double>::max();
  double inlier_fraction = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  /// ICP only: RMSE at the initial pose followed by every accepted iteration.
  std::vector<double> rmse_history;
};

struct RansacParams {
  std::size_t max_trials = 4096;
  double inlier_threshold = 0.015;
  std::uint64_t seed = 0;
  double min_inlier_fraction = 0.25;
  /// Reject samples whose pairwise edge lengths disagree by more than this
  /// ratio between source and target.
  double edge_length_ratio = 0.9;
  /// Reject models rotating the source by more than this angle.
  std::optional<double> max_rotation_rad;
  /// Keep only mutual nearest-descriptor pairs. When fewer than
  /// `min_mutual` survive (0 disables this), every source point's nearest
  /// target is used instead.
  bool mutual_filter = true;
  std::size_t min_mutual = 0;
};

/// Index pairs (source, target) whose descriptors are mutual nearest
/// neighbors under L2; zero descriptors never match.
std::vector<std::pair<std::size_t, std::size_t>> mutual_correspondences(
    const std::vector<FpfhDescriptor>& source, const std::vector<FpfhDescriptor>& target);

/// Every nonzero source descriptor paired with its nearest target descriptor.
std::vector<std::pair<std::size_t, std::size_t>> forward_correspondences(
    const std::vector<FpfhDescriptor>& source, const std::vector<FpfhDescriptor>& target);

RegistrationResult ransac_register(const PointCloud& source, const PointCloud& target,
                                   const std::vector<FpfhDescriptor>& source_features,
                                   const std::vector<FpfhDescriptor>& target_features,
                                   const RansacParams& params = {});

struct IcpParams {
  std::size_t max_iterations = 50;
  double max_correspondence_distance = 0.02;
  double tolerance = 1e-6;
};

/// Point-to-point ICP from `init`. The returned pose maps source into the
/// target frame (init included). A step that would raise the RMSE is not
/// taken and ends the iteration.
RegistrationResult icp_refine(const PointCloud& source, const PointCloud& target,
                              const RigidPose& init, const IcpParams& params = {});

/// Voxel-grid centroids, ordered by voxel key.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

}  // namespace twinforge
