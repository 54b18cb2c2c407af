#pragma once

// Stage 1 of mesh-to-observation alignment: render the mesh under a set of
// rotation hypotheses, embed every render and the masked observation with a
// view feature extractor, and keep the hypothesis whose embedding is most
// cosine-similar to the observation's.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "twinforge/geometry.hpp"
#include "twinforge/render.hpp"

namespace twinforge {

struct PoseHypothesisSet {
  std::vector<RigidPose> poses;
  Vec3 anchor = Vec3::Zero();
  std::size_t rotation_count = 0;
  std::uint64_t seed = 0;
};

/// The 24 proper rotations of the cube, each followed by yaw offsets of 0, 30
/// and 60 degrees about the object z axis; identity first.
std::vector<Eigen::Quaterniond> cube_yaw_rotations();

/// Every hypothesis sits at `anchor_translation`. The first min(n, 72)
/// rotations come from cube_yaw_rotations(); any beyond that are Haar-uniform
/// draws from `seed`.
PoseHypothesisSet generate_hypotheses(const Vec3& anchor_translation, std::size_t rotation_count,
                                      std::uint64_t seed);

struct FeatureVector {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
};

class ViewFeatureExtractor {
 public:
  virtual ~ViewFeatureExtractor() = default;
  virtual std::size_t dimension() const = 0;
  /// Deterministic; the result always has dimension() entries.
  virtual FeatureVector extract(const ColorImage& image) const = 0;
};

/// Luminance resized to 32x32 by area averaging, split into 8x8 cells; each
/// cell contributes its mean intensity and an 8-bin magnitude-weighted Sobel
/// orientation histogram. The 576-vector is L2-normalized.
class GridDescriptor final : public ViewFeatureExtractor {
 public:
  static constexpr int kImageSize = 32;
  static constexpr int kCells = 8;
  static constexpr int kBins = 8;
  std::size_t dimension() const override { return kCells * kCells * (kBins + 1); }
  FeatureVector extract(const ColorImage& image) const override;
};

FeatureVector grid_descriptor(const ColorImage& image);

/// Grayscale resize by exact area averaging (fractional pixel overlap).
Image<double> resize_area(const Image<double>& src, int width, int height);

/// Throws InvalidInput on a dimension mismatch or a zero vector.
double cosine_similarity(const FeatureVector& a, const FeatureVector& b);

struct CoarseAlignOptions {
  /// Longest image side for hypothesis renders when object_pixels is 0.
  int render_size = 128;
  /// When > 0, hypotheses are rendered in a square window centered on the
  /// anchor, scaled so the mesh diameter spans this many pixels; the window
  /// is twice that wide. Keeps small objects in large frames resolvable.
  int object_pixels = 64;
  RenderOptions render;
  /// Compare square crops around the object instead of whole frames.
  bool crop_to_object = true;
  double crop_margin = 0.1;
};

struct CoarseAlignment {
  RigidPose best_pose;
  std::size_t best_index = 0;
  double similarity = -1.0;
  /// Back-projected depth of the winning hypothesis rendered with the
  /// observation's intrinsics.
  PointCloud rendered_partial;
  std::vector<std::pair<std::size_t, double>> all_scores;
};

/// Intrinsics used for hypothesis renders (see CoarseAlignOptions).
CameraIntrinsics hypothesis_intrinsics(const TriangleMesh& mesh, const Vec3& anchor,
                                       const CameraIntrinsics& intrinsics, const CoarseAlignOptions& options);

/// Replaces unmasked pixels with `background`.
ColorImage mask_observation(const ColorImage& observation, const BinaryMask& mask,
                            const Color& background);

/// Square crop around the mask's bounding box, padded with `background`.
ColorImage crop_to_mask(const ColorImage& image, const BinaryMask& mask, double margin,
                        const Color& background);

CoarseAlignment select_coarse_pose(const TriangleMesh& mesh, const PoseHypothesisSet& hypotheses,
                                   const ColorImage& observation, const BinaryMask& obs_mask,
                                   const CameraIntrinsics& intrinsics,
                                   const ViewFeatureExtractor& extractor,
                                   const CoarseAlignOptions& options = {});

struct CoarseRefineOptions {
  /// Hill-climb from this many of the best-scoring hypotheses.
  std::size_t starts = 32;
  double initial_step_deg = 20.0;
  double final_step_deg = 2.0;
};

struct RefinedCoarsePose {
  RigidPose pose;
  double similarity = -1.0;
  std::size_t evaluations = 0;
};

/// Local render-and-compare search around the best hypotheses: each start
/// moves to the best of its six camera-axis rotations by +/-step while that
/// improves the similarity, halving the step otherwise. The best pose over
/// all starts wins; ties keep the earlier start.
RefinedCoarsePose refine_coarse_pose(const TriangleMesh& mesh, const PoseHypothesisSet& hypotheses,
                                     const CoarseAlignment& coarse, const ColorImage& observation,
                                     const BinaryMask& obs_mask, const CameraIntrinsics& intrinsics,
                                     const ViewFeatureExtractor& extractor,
                                     const CoarseAlignOptions& options = {},
                                     const CoarseRefineOptions& refine = {});

/// backproject(render(mesh, pose).depth); empty when the mesh is not visible.
PointCloud partial_cloud_from_pose(const TriangleMesh& mesh, const RigidPose& pose,
                                   const CameraIntrinsics& intrinsics,
                                   const RenderOptions& options = {});

/// CSV: index,w,x,y,z,similarity
void write_score_table(const std::filesystem::path& path, const PoseHypothesisSet& hypotheses,
                       const CoarseAlignment& alignment);

}  // namespace twinforge
