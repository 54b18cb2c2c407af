#pragma once

// Scene files: camera, observation images, objects with roles and masks,
// instruction and goal. JSON with a schema version; paths are relative to
// the scene file.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "twinforge/evaluator.hpp"

namespace twinforge {

inline constexpr int kSceneSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kTwinforgeVersion = "0.1.0";

struct ObjectSpec {
  std::string name;
  ObjectRole role = ObjectRole::fixed;
  /// Mesh file, or "generate:<primitive spec>".
  std::string mesh;
  std::string material = "default";
  /// Segmentation mask; required for manipulated and interactive objects.
  std::string mask;
  /// World pose used as given for static objects.
  std::optional<RigidPose> pose;
  /// For benchmarks and re-simulation checks only.
  std::optional<RigidPose> ground_truth_pose;
};

struct SceneSpec {
  std::filesystem::path base_dir;  // directory of the scene file; not serialized
  CameraIntrinsics intrinsics;
  /// Camera-to-world.
  RigidPose camera_pose;
  std::string rgb;
  std::string depth;
  double depth_scale = 0.001;  // for 16-bit PGM depth
  std::string region_mask;
  /// Grasp candidate file in the camera frame; optional.
  std::string grasps;
  std::string instruction;
  Goal goal;
  std::vector<ObjectSpec> objects;
  std::uint64_t seed = 0;
  /// Pipeline configuration overrides.
  nlohmann::json config = nlohmann::json::object();

  /// Exactly one manipulated object, unique names, masks where needed, goal
  /// predicates that name known objects.
  void validate() const;
  std::filesystem::path resolve(const std::string& relative) const;
  std::size_t manipulated_index() const;
};

nlohmann::json pose_to_json(const RigidPose& pose);
RigidPose pose_from_json(const nlohmann::json& j);
nlohmann::json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);
nlohmann::json goal_to_json(const Goal& goal);
/// Accepts {"predicate", "args"} or {"all_of": [...]}.
Goal goal_from_json(const nlohmann::json& j);

nlohmann::json scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Throws InvalidInput on schema errors or missing referenced files.
SceneSpec load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const SceneSpec& scene);

TriangleMesh load_object_mesh(const SceneSpec& scene, const ObjectSpec& object);

/// Twin from the ground-truth poses (or given poses for static objects) and
/// the scene's own meshes. Throws InvalidInput when a pose is missing.
SceneTwin ground_truth_twin(const SceneSpec& scene, const MaterialTable& materials);

}  // namespace twinforge
