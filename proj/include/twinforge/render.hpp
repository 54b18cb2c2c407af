#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "twinforge/geometry.hpp"

namespace twinforge {

struct RenderOptions {
  Color background{0.5f, 0.5f, 0.5f};
  /// Triangles with any vertex at z <= near_plane are rejected whole.
  double near_plane = 0.01;
  /// Headlight Lambertian: shade = ambient + (1 - ambient) * |n . l|.
  float ambient = 0.3f;
};

struct RenderedView {
  ColorImage rgb;
  DepthImage depth;
  /// Mesh pose in the camera frame for render(); camera pose in the world for
  /// render_scene().
  RigidPose pose;
  CameraIntrinsics intrinsics;
};

struct PosedMesh {
  const TriangleMesh* mesh = nullptr;
  RigidPose pose;
};

/// Per-pixel provenance of a scene render; -1 marks background.
struct LabeledView {
  RenderedView view;
  Image<int> object_id;
  Image<int> triangle_id;
};

/// Z-buffered perspective rasterization of one mesh posed in the camera frame.
/// Depth and color are interpolated perspective-correctly; pixels are sampled
/// at their centers (intrinsics coordinate (u, v) is the center of pixel
/// (u, v)) with a top-left fill rule.
RenderedView render(const TriangleMesh& mesh, const RigidPose& pose,
                    const CameraIntrinsics& intrinsics, const RenderOptions& options = {});

/// Multi-object render. `view_pose` maps camera coordinates to world
/// coordinates; object poses are world-frame.
RenderedView render_scene(std::span<const PosedMesh> objects, const RigidPose& view_pose,
                          const CameraIntrinsics& intrinsics, const RenderOptions& options = {});

LabeledView render_scene_labeled(std::span<const PosedMesh> objects, const RigidPose& view_pose,
                                 const CameraIntrinsics& intrinsics,
                                 const RenderOptions& options = {});

/// Valid-depth pixels of a rendered view.
BinaryMask coverage_mask(const RenderedView& view);

/// Writes `<prefix>_rgb.ppm` and `<prefix>_depth.pgm` (16-bit, millimeters).
void dump_view(const std::filesystem::path& prefix, const RenderedView& view);

}  // namespace twinforge
