#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "twinforge/geometry.hpp"
#include "twinforge/random.hpp"

namespace testutil {

/// Fresh directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("twinforge_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline twinforge::RigidPose random_pose(twinforge::Rng& rng, double t = 0.5) {
  return twinforge::RigidPose(rng.rotation(), twinforge::Vec3(rng.uniform(-t, t), rng.uniform(-t, t), rng.uniform(-t, t)));
}

/// Pose-matrix comparison.
inline double pose_gap(const twinforge::RigidPose& a, const twinforge::RigidPose& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

/// Nearest ray parameter over all triangles (plain Moller-Trumbore).
inline std::optional<double> ray_depth(const twinforge::TriangleMesh& mesh, const twinforge::Vec3& dir) {
  std::optional<double> best;
  for (const auto& t : mesh.triangles) {
    const twinforge::Vec3 a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
    const twinforge::Vec3 e1 = b - a, e2 = c - a, p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-15) continue;
    const twinforge::Vec3 s = -a;
    const double u = s.dot(p) / det;
    const twinforge::Vec3 q = s.cross(e1);
    const double v = dir.dot(q) / det, tt = e2.dot(q) / det;
    if (u < 0 || v < 0 || u + v > 1 || tt <= 0) continue;
    if (!best || tt < *best) best = tt;
  }
  return best;
}

}  // namespace testutil
