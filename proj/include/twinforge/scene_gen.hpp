#pragma once

// Synthetic scenes: primitive meshes at sampled ground-truth poses, rendered
// into RGB-D observations with exact masks, region mask and grasp candidates.

#include <filesystem>
#include <string>
#include <vector>

#include "twinforge/scene.hpp"

namespace twinforge {

/// Named tasks: "cube-into-box", "cube-onto-cube", "cup-upside-down-on-box".
const std::vector<std::string>& synthetic_tasks();

struct SceneGenOptions {
  /// A task name, or a primitive (class name or spec) placed on a table.
  std::string recipe = "cube-into-box";
  std::uint64_t seed = 0;
  int width = 640;
  int height = 480;
  double focal = 560.0;
  double camera_distance = 0.6;
  std::size_t grasp_candidates = 200;
};

/// Looks from `eye` at `target`; camera-to-world with +y of the image
/// pointing down in the world.
RigidPose look_at(const Vec3& eye, const Vec3& target);

/// Writes scene.json and the files it references into `out_dir`.
SceneSpec generate_synthetic_scene(const std::filesystem::path& out_dir, const SceneGenOptions& options);

}  // namespace twinforge
