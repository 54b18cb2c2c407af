#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/error.hpp"
#include "twinforge/primitives.hpp"
#include "twinforge/strategy.hpp"

using namespace twinforge;

TEST_CASE("halton sequence in bases 2 and 3") {
  CHECK(halton2(0).isApprox(Eigen::Vector2d(0.0, 0.0)) );
  CHECK(halton2(1).isApprox(Eigen::Vector2d(0.5, 1.0 / 3.0)));
  CHECK(halton2(2).isApprox(Eigen::Vector2d(0.25, 2.0 / 3.0)));
  CHECK(halton2(3).isApprox(Eigen::Vector2d(0.75, 1.0 / 9.0)));
}

TEST_CASE("interaction region maps to the world") {
  const CameraIntrinsics k{100.0, 100.0, 2.0, 2.0, 4, 4};
  DepthImage depth(4, 4, 1.0);
  BinaryMask mask(4, 4);
  mask.at(2, 2) = 1;
  const RigidPose cam = RigidPose::from_translation(Vec3(0.5, 0, 0));
  const InteractionRegion r = interaction_region(mask, depth, k, cam);
  CHECK(r.centroid.isApprox(Vec3(0.5, 0, 1.0)));
  CHECK_THROWS_AS(interaction_region(BinaryMask(4, 4), depth, k), InvalidInput);
}

TEST_CASE("sampled strategies sit above the region and are reproducible") {
  InteractionRegion region;
  region.centroid = Vec3(0.1, -0.05, 0.06);
  region.cloud.points = {region.centroid};
  const TriangleMesh cube = make_box(Vec3(0.05, 0.05, 0.05));
  SamplingOptions o;
  const auto all = [](const RigidPose&) { return true; };
  const auto s = sample_strategies(region, cube, o, all, 3);
  REQUIRE(s.size() == static_cast<std::size_t>(o.n_rotations * o.n_offsets) * o.rest_orientations.size());
  std::set<int> ids;
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].sample_id == static_cast<int>(i));
    double lowest = 1e9;
    for (const auto& v : cube.vertices) lowest = std::min(lowest, (s[i].object_pose * v).z());
    CHECK(lowest == doctest::Approx(region.centroid.z() + o.clearance));
    const Vec3 d = s[i].object_pose.translation - region.centroid;
    CHECK(std::hypot(d.x(), d.y()) <= o.offset_radius + 1e-12);
  }
  // The first offset is the centroid itself.
  CHECK(std::hypot(s[0].object_pose.translation.x() - 0.1, s[0].object_pose.translation.y() + 0.05) < 1e-12);
  const auto again = sample_strategies(region, cube, o, all, 3);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(testutil::pose_gap(s[i].object_pose, again[i].object_pose) == 0.0);

  // A reachability predicate drops samples and ids stay sequential.
  const auto half = sample_strategies(region, cube, o, [](const RigidPose& p) {
    return (p.rotation * Vec3::UnitZ()).z() > 0.9;
  }, 3);
  CHECK(half.size() == static_cast<std::size_t>(o.n_rotations * o.n_offsets));
  CHECK(half.back().sample_id == static_cast<int>(half.size()) - 1);
}

TEST_CASE("built-in reachability") {
  const Aabb ws{Vec3(-1, -1, 0), Vec3(1, 1, 1)};
  CHECK(builtin_reachability(RigidPose::from_translation(Vec3(0, 0, 0.1)), ws, 30.0));
  CHECK_FALSE(builtin_reachability(RigidPose::from_translation(Vec3(2, 0, 0.1)), ws, 30.0));
  CHECK(builtin_reachability(RigidPose::from_axis_angle(Vec3::UnitX(), M_PI / 2, Vec3(0, 0, 0.1)), ws, 30.0));
  CHECK_FALSE(builtin_reachability(RigidPose::from_axis_angle(Vec3::UnitX(), M_PI / 4, Vec3(0, 0, 0.1)), ws, 30.0));
  // Lying on its side with a different yaw still matches a rest tilt.
  const RigidPose side = RigidPose(Eigen::Quaterniond(Eigen::AngleAxisd(1.0, Vec3::UnitZ()) * Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY())), Vec3(0, 0, 0.1));
  CHECK(builtin_reachability(side, ws, 30.0));
}
