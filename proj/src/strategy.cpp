#include "twinforge/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace twinforge {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double radical_inverse(std::size_t i, std::size_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

double tilt_of(const Eigen::Quaterniond& q) {
  const double c = std::clamp((q * Vec3::UnitZ()).z(), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace

InteractionRegion interaction_region(const BinaryMask& mask, const DepthImage& depth,
                                     const CameraIntrinsics& intrinsics,
                                     const RigidPose& camera_to_world) {
  InteractionRegion region;
  region.cloud = transform_cloud(backproject(depth, intrinsics, &mask), camera_to_world);
  if (region.cloud.empty()) throw InvalidInput("interaction region has no valid depth pixels");
  region.centroid = region.cloud.centroid();
  return region;
}

std::vector<Eigen::Quaterniond> default_rest_orientations() {
  using Eigen::AngleAxisd;
  const double h = M_PI / 2.0;
  return {Eigen::Quaterniond::Identity(),
          Eigen::Quaterniond(AngleAxisd(h, Vec3::UnitX())),
          Eigen::Quaterniond(AngleAxisd(-h, Vec3::UnitX())),
          Eigen::Quaterniond(AngleAxisd(M_PI, Vec3::UnitX())),
          Eigen::Quaterniond(AngleAxisd(h, Vec3::UnitY())),
          Eigen::Quaterniond(AngleAxisd(-h, Vec3::UnitY()))};
}

bool builtin_reachability(const RigidPose& pose, const Aabb& workspace, double max_tilt_deg,
                          const std::vector<Eigen::Quaterniond>& rest) {
  if (!workspace.contains(pose.translation)) return false;
  const double tilt = tilt_of(pose.rotation);
  if (tilt <= max_tilt_deg * kDegToRad + 1e-12) return true;
  // Yaw does not change the tilt, so comparing tilts compares against every
  // yawed copy of a rest orientation.
  return std::any_of(rest.begin(), rest.end(), [&](const Eigen::Quaterniond& r) {
    return std::abs(tilt - tilt_of(r)) <= 5.0 * kDegToRad + 1e-12;
  });
}

Eigen::Vector2d halton2(std::size_t i) { return {radical_inverse(i, 2), radical_inverse(i, 3)}; }

std::vector<StrategySample> sample_strategies(const InteractionRegion& region, const TriangleMesh& mesh,
                                              const SamplingOptions& options,
                                              const ReachabilityPredicate& reach, std::uint64_t seed) {
  if (options.n_rotations < 1 || options.n_offsets < 1) {
    throw InvalidInput("sample_strategies: counts must be >= 1");
  }
  if (!(options.offset_radius >= 0.0)) throw InvalidInput("sample_strategies: radius must be >= 0");
  if (mesh.vertices.empty()) throw InvalidInput("sample_strategies: empty mesh");
  if (options.rest_orientations.empty()) throw InvalidInput("sample_strategies: no rest orientations");

  const double phase = 2.0 * M_PI * radical_inverse(seed + 1, 5);
  std::vector<Eigen::Vector2d> offsets;
  for (int i = 0; i < options.n_offsets; ++i) {
    const Eigen::Vector2d h = halton2(static_cast<std::size_t>(i));
    const double r = options.offset_radius * std::sqrt(h.x());
    const double a = 2.0 * M_PI * h.y() + phase;
    offsets.emplace_back(r * std::cos(a), r * std::sin(a));
  }

  std::vector<StrategySample> out;
  for (const auto& off : offsets) {
    for (const auto& rest : options.rest_orientations) {
      for (int k = 0; k < options.n_rotations; ++k) {
        const double yaw = 2.0 * M_PI * k / options.n_rotations;
        const Eigen::Quaterniond q =
            (Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) * rest).normalized();
        double min_z = std::numeric_limits<double>::infinity();
        for (const auto& v : mesh.vertices) min_z = std::min(min_z, (q * v).z());
        const Vec3 t(region.centroid.x() + off.x(), region.centroid.y() + off.y(),
                     region.centroid.z() - min_z + options.clearance);
        const RigidPose pose(q, t);
        if (!reach(pose)) continue;
        StrategySample& s = out.emplace_back();
        s.object_pose = pose;
        s.sample_id = static_cast<int>(out.size()) - 1;
      }
    }
  }
  return out;
}

}  // namespace twinforge
