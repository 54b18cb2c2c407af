#pragma once

// Grasp candidates from an external predictor, narrowed to the target object.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "twinforge/geometry.hpp"

namespace twinforge {

struct GraspCandidate {
  /// Gripper frame.
  RigidPose pose;
  /// Contact midpoint x(g), tested against the object cloud.
  Vec3 grasp_point = Vec3::Zero();
  double width = 0.0;
  double confidence = 0.0;

  void validate() const;
};

/// Source of candidates for an observation (an external network, or a file).
class GraspProvider {
 public:
  virtual ~GraspProvider() = default;
  virtual std::vector<GraspCandidate> provide() = 0;
};

/// Whitespace-separated records, one per line, '#' starts a comment:
///   qw qx qy qz  tx ty tz  gx gy gz  width  confidence
std::vector<GraspCandidate> read_grasp_candidates(const std::filesystem::path& path);
void write_grasp_candidates(const std::filesystem::path& path,
                            const std::vector<GraspCandidate>& candidates);

class FileGraspProvider : public GraspProvider {
 public:
  explicit FileGraspProvider(std::filesystem::path path) : path_(std::move(path)) {}
  std::vector<GraspCandidate> provide() override { return read_grasp_candidates(path_); }

 private:
  std::filesystem::path path_;
};

/// The k most confident candidates in descending order; ties keep input order.
std::vector<GraspCandidate> top_k_by_confidence(const std::vector<GraspCandidate>& candidates,
                                                std::size_t k = 1000);

/// Keeps candidates whose grasp point lies within `threshold` of some cloud
/// point. Order is preserved.
std::vector<GraspCandidate> filter_by_object_proximity(const std::vector<GraspCandidate>& candidates,
                                                       const PointCloud& object_cloud,
                                                       double threshold = 0.01);

class NoFeasibleGrasp : public std::runtime_error {
 public:
  NoFeasibleGrasp() : std::runtime_error("no-feasible-grasp") {}
};

/// Highest confidence, lowest index on ties. Throws NoFeasibleGrasp if empty.
const GraspCandidate& select_best_grasp(const std::vector<GraspCandidate>& candidates);

struct GraspAttempt {
  std::size_t candidate_index = 0;  // into the filtered, ranked list
  double confidence = 0.0;
  bool accepted = false;
};

struct GraspSearch {
  bool found = false;
  GraspCandidate grasp;
  std::vector<GraspAttempt> attempts;
  std::string failure;  // empty on success
};

struct GraspSelectOptions {
  std::size_t top_k = 1000;
  double proximity = 0.01;
  std::size_t max_attempts = 3;
};

/// Execution check for a chosen grasp (a real robot, or a scripted stand-in).
using GraspCheck = std::function<bool(const GraspCandidate&)>;

/// provide -> top-k -> filter -> try candidates best-first until `check`
/// accepts one or max_attempts is used up.
GraspSearch grasp_with_retry(GraspProvider& provider, const PointCloud& object_cloud,
                             const GraspCheck& check, const GraspSelectOptions& options = {});

}  // namespace twinforge
