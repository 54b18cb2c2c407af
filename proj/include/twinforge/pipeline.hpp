#pragma once

// End-to-end run: load segmentation, pick a grasp, align every object mesh,
// build the twin, sample placements, simulate and label them, fit the GP and
// select the most promising placement.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "twinforge/alignment.hpp"
#include "twinforge/gp.hpp"
#include "twinforge/grasp.hpp"
#include "twinforge/scene.hpp"

namespace twinforge {

struct PipelineConfig {
  AlignmentConfig alignment;
  GraspSelectOptions grasp;
  double max_gripper_width = 0.085;
  SamplingOptions sampling;
  Aabb workspace{Vec3(-1.0, -1.0, 0.0), Vec3(1.0, 1.0, 1.0)};
  double max_tilt_deg = 30.0;
  SettleOptions simulation;
  /// Optional material table file replacing built-in rows.
  std::string materials;
  Se3KernelParams gp;
  GpFitOptions gp_fit;
};

/// Keys absent from `j` keep their value in `base`; unknown keys throw.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& config);

/// Stage names in report order.
const std::vector<std::string>& pipeline_stages();

struct StageRecord {
  std::string stage;
  bool success = true;
  std::string reason;
  double time_ms = 0.0;
  std::vector<std::string> artifacts;
  nlohmann::json details = nlohmann::json::object();
};

struct RunReport {
  std::vector<StageRecord> stages;
  /// By sample_id, with labels and probabilities when those stages ran.
  std::vector<StrategySample> samples;
  std::optional<StrategySample> selected;
  std::vector<int> priority_ids;
  nlohmann::json objects = nlohmann::json::array();
  nlohmann::json config;
  /// Re-simulation of the selection in the ground-truth scene, when every
  /// object has a ground-truth pose.
  std::optional<bool> ground_truth_goal;
  /// Twin the samples were simulated in; not serialized.
  std::optional<SceneTwin> twin;

  bool ok() const;
  const StageRecord* failed_stage() const;
};

struct RunOptions {
  /// Artifacts (GP dump, checker render) go here when set.
  std::optional<std::filesystem::path> out_dir;
  bool verify_ground_truth = true;
};

RunReport run_pipeline(const SceneSpec& scene, const PipelineConfig& config, const RunOptions& options = {});

/// Only segmentation-load, coarse-align and fine-register.
RunReport run_alignment(const SceneSpec& scene, const PipelineConfig& config);

/// Timing fields are dropped when include_timing is false.
nlohmann::json report_to_json(const RunReport& report, bool include_timing = true);
void write_report(const std::filesystem::path& path, const RunReport& report);

struct SingleSimulation {
  StrategySample sample;
  bool goal_satisfied = false;
};

/// One placement simulated in the ground-truth twin of `scene`.
SingleSimulation simulate_single(const SceneSpec& scene, const PipelineConfig& config, const RigidPose& pose);

}  // namespace twinforge
