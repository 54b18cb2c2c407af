#include "twinforge/alignment.hpp"

#include <algorithm>
#include <cmath>

namespace twinforge {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

struct FeatureCloud {
  PointCloud cloud;
  NormalEstimate normals;
};

FeatureCloud partial_features(const PointCloud& dense, const AlignmentConfig& config) {
  FeatureCloud f;
  f.cloud = voxel_downsample(dense, config.feature_voxel);
  if (f.cloud.size() > config.normal_k) f.normals = estimate_normals(f.cloud, config.normal_k);
  return f;
}

/// RANSAC on descriptors, then ICP on the denser clouds. Fills the
/// registration fields of `out` or records a fine-register failure.
void fine_register(const FeatureCloud& source, const FeatureCloud& target,
                   const PointCloud& icp_source, const PointCloud& icp_target,
                   const AlignmentConfig& config, const RansacParams& ransac_params,
                   AlignmentResult& out) {
  if (source.normals.valid_count() < 3 || target.normals.valid_count() < 3) {
    out.failure = StageFailure{"fine-register", "too-few-points"};
    return;
  }
  const double radius = config.fpfh_radius_factor * mean_nn_spacing(target.cloud);
  const auto source_fpfh = compute_fpfh(source.cloud, source.normals, radius);
  const auto target_fpfh = compute_fpfh(target.cloud, target.normals, radius);
  out.ransac = ransac_register(source.cloud, target.cloud, source_fpfh, target_fpfh, ransac_params);
  if (!out.ransac.converged) {
    out.failure = StageFailure{"fine-register", "ransac-not-converged"};
    return;
  }
  out.registration = icp_refine(icp_source, icp_target, out.ransac.pose, config.icp);
  if (out.registration.rmse_history.empty()) {
    out.failure = StageFailure{"fine-register", "icp-no-correspondences"};
  }
}

std::size_t masked_valid_pixels(const Observation& obs) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < obs.mask.size(); ++i) {
    if (obs.mask.values[i] && valid_depth(obs.depth.values[i])) ++n;
  }
  return n;
}

bool check_observation(const Observation& obs, const AlignmentConfig& config, AlignmentResult& out) {
  obs.intrinsics.validate();
  const int w = obs.intrinsics.width, h = obs.intrinsics.height;
  if (!obs.depth.same_shape(w, h) || !obs.mask.same_shape(w, h) || !obs.rgb.same_shape(w, h)) {
    throw InvalidInput("observation images differ from the intrinsics size");
  }
  if (masked_valid_pixels(obs) < config.min_mask_pixels) {
    out.failure = StageFailure{"segmentation", "segmentation-too-small"};
    return false;
  }
  return true;
}

/// Render at `pose`, dropping pixels where an unmasked observed surface sits
/// in front of the render; only what the camera could see of the object stays.
PointCloud unoccluded_render_partial(const TriangleMesh& mesh, const RigidPose& pose, const Observation& obs,
                                     const RenderOptions& options) {
  constexpr double kOcclusionMargin = 0.005;
  const RenderedView view = render(mesh, pose, obs.intrinsics, options);
  BinaryMask keep(view.depth.width, view.depth.height);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const double z = view.depth.values[i], seen = obs.depth.values[i];
    const bool occluded = !obs.mask.values[i] && valid_depth(seen) && seen < z - kOcclusionMargin;
    keep.values[i] = valid_depth(z) && !occluded;
  }
  return backproject(view.depth, obs.intrinsics, &keep);
}

}  // namespace

PointCloud observed_partial(const Observation& obs) {
  return backproject(obs.depth, obs.intrinsics, &obs.mask);
}

TriangleMesh scale_mesh_in_camera(const TriangleMesh& mesh, const RigidPose& pose,
                                  const Vec3& per_axis, const Vec3& center) {
  Eigen::Affine3d to_camera = Eigen::Affine3d::Identity();
  to_camera.linear() = pose.rotation_matrix();
  to_camera.translation() = pose.translation;
  Eigen::Affine3d stretch = Eigen::Affine3d::Identity();
  stretch.linear() = per_axis.asDiagonal();
  stretch.translation() = center - per_axis.cwiseProduct(center);
  return transform_mesh(mesh, to_camera.inverse() * stretch * to_camera);
}

AlignmentResult coarse_align_stage(const TriangleMesh& mesh, const Observation& obs,
                                   const AlignmentConfig& config, const ViewFeatureExtractor& extractor) {
  AlignmentResult out;
  out.scaled_mesh = mesh;
  if (!check_observation(obs, config, out)) return out;
  const PointCloud target_dense = observed_partial(obs);

  const PoseHypothesisSet hypotheses =
      generate_hypotheses(target_dense.centroid(), config.rotation_count, config.seed);
  out.coarse = select_coarse_pose(mesh, hypotheses, obs.rgb, obs.mask, obs.intrinsics, extractor,
                                  config.coarse);
  out.coarse_pose = out.coarse.best_pose;
  out.coarse_similarity = out.coarse.similarity;
  out.coarse_partial = out.coarse.rendered_partial;
  if (config.coarse_refine.starts > 0 && out.coarse.similarity > -1.0) {
    const RefinedCoarsePose refined =
        refine_coarse_pose(mesh, hypotheses, out.coarse, obs.rgb, obs.mask, obs.intrinsics, extractor,
                           config.coarse, config.coarse_refine);
    if (refined.similarity > out.coarse.similarity) {
      out.coarse_pose = refined.pose;
      out.coarse_similarity = refined.similarity;
      out.coarse_partial = partial_cloud_from_pose(mesh, out.coarse_pose, obs.intrinsics, config.coarse.render);
    }
  }
  // Hypotheses put the mesh origin on the observed centroid; move the pose so
  // the rendered visible surface lands on the observed one instead.
  for (int i = 0; i < config.coarse_centering_steps && !out.coarse_partial.empty(); ++i) {
    const PointCloud visible = unoccluded_render_partial(mesh, out.coarse_pose, obs, config.coarse.render);
    if (visible.empty()) break;
    const Vec3 delta = target_dense.centroid() - visible.centroid();
    out.coarse_pose.translation += delta;
    if (delta.norm() < 1e-4) break;
  }
  if (config.coarse_centering_steps > 0 && !out.coarse_partial.empty()) {
    out.coarse_partial = partial_cloud_from_pose(mesh, out.coarse_pose, obs.intrinsics, config.coarse.render);
  }
  out.pose = out.coarse_pose;
  if (out.coarse_similarity <= -1.0 || out.coarse_partial.empty()) {
    out.failure = StageFailure{"coarse-align", "object-not-visible"};
  }
  return out;
}

void fine_register_stage(const TriangleMesh& mesh, const Observation& obs, const AlignmentConfig& config,
                         AlignmentResult& out) {
  if (!out.ok()) throw InvalidInput("fine_register_stage: coarse stage failed");
  const PointCloud target_dense = observed_partial(obs);
  const PointCloud target_icp = voxel_downsample(target_dense, config.icp_voxel);
  const FeatureCloud target_features = partial_features(target_dense, config);
  RansacParams ransac = config.ransac;
  ransac.seed = config.seed;
  ransac.max_rotation_rad = config.refine_max_rotation_deg * kDegToRad;

  // One pass: scale about `anchor`, then RANSAC and ICP from there.
  auto pass = [&](const RigidPose& anchor, PointCloud source_dense, AlignmentResult& r) {
    r.scaled_mesh = mesh;
    r.scale = ScaleEstimate{};
    if (config.estimate_scale) {
      r.scale = estimate_scale(source_dense, target_dense);
      if (config.depth_scale_from_image_axes) {
        r.scale.per_axis.z() = 0.5 * (r.scale.per_axis.x() + r.scale.per_axis.y());
      }
      const Vec3 center = compute_aabb(source_dense).center();
      for (auto& p : source_dense.points) p = center + r.scale.per_axis.cwiseProduct(p - center);
      r.scaled_mesh = scale_mesh_in_camera(mesh, anchor, r.scale.per_axis, center);
    }
    fine_register(partial_features(source_dense, config), target_features,
                  voxel_downsample(source_dense, config.icp_voxel), target_icp, config, ransac, r);
    if (r.ok()) r.pose = r.registration.pose * anchor;
  };

  pass(out.coarse_pose, unoccluded_render_partial(mesh, out.coarse_pose, obs, config.coarse.render), out);
  if (!out.ok() || config.scale_passes < 2) return;
  // Scale again from the registered pose, where the rendered and observed
  // extents are directly comparable.
  for (int i = 1; i < config.scale_passes; ++i) {
    const PointCloud partial = unoccluded_render_partial(mesh, out.pose, obs, config.coarse.render);
    if (partial.empty()) return;
    AlignmentResult again = out;
    again.failure.reset();
    pass(out.pose, partial, again);
    if (!again.ok() || again.registration.rmse > out.registration.rmse) return;
    out = std::move(again);
  }
}

AlignmentResult two_stage_align(const TriangleMesh& mesh, const Observation& obs,
                                const AlignmentConfig& config, const ViewFeatureExtractor& extractor) {
  AlignmentResult out = coarse_align_stage(mesh, obs, config, extractor);
  if (out.ok()) fine_register_stage(mesh, obs, config, out);
  return out;
}

AlignmentResult direct_align(const TriangleMesh& mesh, const Observation& obs,
                             const AlignmentConfig& config) {
  AlignmentResult out;
  out.scaled_mesh = mesh;
  if (!check_observation(obs, config, out)) return out;
  const PointCloud target_dense = observed_partial(obs);

  auto surface_samples = [&](double spacing, std::uint64_t seed, std::vector<std::size_t>* tris) {
    const double n = std::clamp(mesh.surface_area() / (spacing * spacing), 100.0, 20000.0);
    return sample_mesh_surface(mesh, static_cast<std::size_t>(n), seed, tris);
  };
  // The complete surface is the target: every observed point has a match on
  // it, while most of the surface has none in a single view.
  FeatureCloud model;
  std::vector<std::size_t> tris;
  model.cloud = surface_samples(config.feature_voxel, config.seed, &tris);
  model.normals.normals.reserve(tris.size());
  for (std::size_t t : tris) model.normals.normals.push_back(mesh.triangle_normal(t));
  model.normals.valid.assign(tris.size(), 1);
  PointCloud icp_model = surface_samples(config.icp_voxel, config.seed + 1, nullptr);

  // Unrotated, with the sample centroid moved onto the observed centroid.
  const RigidPose init = RigidPose::from_translation(target_dense.centroid() - icp_model.centroid());
  model.cloud = transform_cloud(model.cloud, init);
  icp_model = transform_cloud(icp_model, init);

  RansacParams ransac = config.ransac;
  ransac.seed = config.seed;
  fine_register(partial_features(target_dense, config), model,
                voxel_downsample(target_dense, config.icp_voxel), icp_model, config, ransac, out);
  // Registration maps the observation onto the placed model; invert it.
  out.pose = out.ok() ? out.registration.pose.inverse() * init : init;
  return out;
}

bool alignment_success(const RigidPose& estimated, const RigidPose& truth, double object_diameter) {
  if (!(object_diameter > 0.0)) throw InvalidInput("alignment_success: diameter must be positive");
  constexpr double kMaxRotationDeg = 15.0;
  const double rotation_deg = rotation_angle_between(estimated.rotation, truth.rotation) / kDegToRad;
  const double translation = (estimated.translation - truth.translation).norm();
  // Tiny slack so that an error of exactly 15 degrees survives the round trip
  // through quaternions.
  return rotation_deg <= kMaxRotationDeg + 1e-9 &&
         translation <= std::max(0.01, 0.1 * object_diameter);
}

}  // namespace twinforge
