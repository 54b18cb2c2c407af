#pragma once

// Two-stage vs direct alignment on synthetic single-object views.

#include <filesystem>
#include <string>
#include <vector>

#include "twinforge/alignment.hpp"

namespace twinforge {

struct AlignmentTrial {
  TriangleMesh mesh;
  Observation observation;
  /// Mesh pose in the camera frame.
  RigidPose truth;
};

/// Default benchmark intrinsics: 256x256, fx = fy = 320.
CameraIntrinsics benchmark_intrinsics();

/// Primitive spec for a benchmark class name (box, cylinder, cup, open_box,
/// ramp); anything containing ':' is returned unchanged.
std::string benchmark_primitive(const std::string& object);

/// Random rotation; the box center lands about 0.5 m in front of the camera.
AlignmentTrial make_alignment_trial(const TriangleMesh& mesh, const CameraIntrinsics& intrinsics,
                                    std::uint64_t seed);

struct BenchmarkConfig {
  std::vector<std::string> objects = {"box", "cylinder", "cup", "open_box"};
  std::size_t trials = 40;
  std::uint64_t seed = 0;
  AlignmentConfig alignment;
  CameraIntrinsics intrinsics = benchmark_intrinsics();
};

struct TrialOutcome {
  bool valid = false;  // no stage failure
  bool success = false;
  double rmse = 0.0;
  double rotation_error_deg = 0.0;
  double translation_error = 0.0;
  std::string failure;
};

struct BenchmarkRow {
  std::string object;
  std::string arm;  // "two-stage" or "direct"
  std::size_t trials = 0;
  std::size_t valid = 0;
  std::size_t successes = 0;
  /// Mean final RMSE over successful trials; 0 when there are none.
  double mean_rmse = 0.0;
  double max_rmse = 0.0;
  std::vector<TrialOutcome> outcomes;

  double success_rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  double seconds = 0.0;

  /// Aggregate success rate of one arm over all objects.
  double aggregate_success(const std::string& arm) const;
};

TrialOutcome score_alignment(const AlignmentResult& result, const AlignmentTrial& trial);

BenchmarkReport run_alignment_benchmark(const BenchmarkConfig& config);

/// Columns: object,arm,trials,valid_samples,success_rate,mean_rmse
void write_benchmark_csv(const std::filesystem::path& path, const BenchmarkReport& report);

}  // namespace twinforge
