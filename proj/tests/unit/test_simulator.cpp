#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/primitives.hpp"
#include "twinforge/simulator.hpp"
#include "twinforge/strategy.hpp"

using namespace twinforge;

namespace {

SceneTwin single(const TriangleMesh& mesh) {
  SceneTwin t;
  t.objects.push_back({"a", mesh, RigidPose::identity(), default_material(), ObjectRole::manipulated});
  return t;
}

SettleOptions quiet() {
  SettleOptions o;
  o.render = false;
  return o;
}

StrategySample at(const RigidPose& p) {
  StrategySample s;
  s.object_pose = p;
  return s;
}

double lowest_z(const TriangleMesh& m, const RigidPose& p) {
  double z = 1e9;
  for (const auto& v : m.vertices) z = std::min(z, (p * v).z());
  return z;
}

}  // namespace

TEST_CASE("a flat box drops onto the ground") {
  const TriangleMesh box = make_box(Vec3(0.05, 0.05, 0.05));
  const SimOutcome o = settle_simulate(single(box), at(RigidPose::from_translation(Vec3(0.1, 0.2, 0.3))), quiet());
  CHECK(o.stable);
  CHECK_FALSE(o.penetration);
  CHECK(o.topple_steps == 0);
  CHECK(o.settled_poses[0].translation.z() == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(o.settled_poses[0].translation.x() == doctest::Approx(0.1));
  CHECK(o.settled_com_z <= o.initial_com_z);
}

TEST_CASE("a tilted box topples onto a face") {
  const TriangleMesh box = make_box(Vec3(0.05, 0.05, 0.1));
  for (double deg : {20.0, 50.0}) {
    const RigidPose start = RigidPose::from_axis_angle(Vec3::UnitX(), deg * M_PI / 180.0, Vec3(0, 0, 0.2));
    const SimOutcome o = settle_simulate(single(box), at(start), quiet());
    CHECK(o.stable);
    CHECK(o.topple_steps > 0);
    const Vec3 up = o.settled_poses[0].rotation * Vec3::UnitZ();
    // Flat on the bottom or on a side face.
    const double tilt = std::acos(std::clamp(up.z(), -1.0, 1.0)) * 180.0 / M_PI;
    CHECK((tilt < 2.0 || std::abs(tilt - 90.0) < 2.0));
    CHECK(std::abs(lowest_z(box, o.settled_poses[0])) < 1e-3);
  }
}

TEST_CASE("a cube lands inside an open box") {
  SceneTwin t = single(make_box(Vec3(0.04, 0.04, 0.04)));
  t.objects.push_back({"box", make_open_box(Vec3(0.12, 0.12, 0.06), 0.006), RigidPose::identity(), default_material(), ObjectRole::interactive});
  const SimOutcome o = settle_simulate(t, at(RigidPose::from_translation(Vec3(0, 0, 0.07))), quiet());
  CHECK(o.stable);
  CHECK_FALSE(o.penetration);
  CHECK(o.settled_poses[0].translation.z() == doctest::Approx(0.006).epsilon(0.05));
}

TEST_CASE("a start inside another object is flagged") {
  SceneTwin t = single(make_box(Vec3(0.04, 0.04, 0.04)));
  t.objects.push_back({"block", make_box(Vec3(0.1, 0.1, 0.1)), RigidPose::identity(), default_material(), ObjectRole::fixed});
  const SimOutcome o = settle_simulate(t, at(RigidPose::from_translation(Vec3(0, 0, 0.05))), quiet());
  CHECK(o.penetration);
}

TEST_CASE("settling is translation-equivariant") {
  SceneTwin t = single(make_cylinder(0.03, 0.1));
  t.objects.push_back({"step", make_box(Vec3(0.1, 0.1, 0.03)), RigidPose::identity(), default_material(), ObjectRole::fixed});
  const RigidPose start = RigidPose::from_axis_angle(Vec3(1, 1, 0).normalized(), 0.4, Vec3(0.04, 0.02, 0.15));
  const SimOutcome a = settle_simulate(t, at(start), quiet());
  const Vec3 shift(0.37, -0.21, 0.0);
  SceneTwin moved = t;
  moved.objects[1].pose = RigidPose::from_translation(shift);
  const SimOutcome b = settle_simulate(moved, at(RigidPose::from_translation(shift) * start), quiet());
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((b.settled_poses[i].translation - a.settled_poses[i].translation - shift).norm() < 1e-6);
    CHECK(rotation_angle_between(b.settled_poses[i].rotation, a.settled_poses[i].rotation) < 1e-6);
  }
}

TEST_CASE("open meshes are rejected") {
  TriangleMesh m = make_box(Vec3(0.05, 0.05, 0.05));
  m.triangles.pop_back();
  CHECK_THROWS_AS(settle_simulate(single(m), at(RigidPose::from_translation(Vec3(0, 0, 0.1))), quiet()), SimulationError);
}

TEST_CASE("twin validation") {
  SceneTwin t = single(make_box(Vec3(0.05, 0.05, 0.05)));
  t.objects.push_back(t.objects[0]);
  CHECK_THROWS(t.validate());
  t.objects[1].role = ObjectRole::fixed;
  t.objects[1].name = "b";
  CHECK_NOTHROW(t.validate());
  CHECK(t.index_of("b") == 1);
  t.gravity = Vec3(0, -9.81, 0);
  CHECK_THROWS(t.validate());
  CHECK(parse_role("static") == ObjectRole::fixed);
  CHECK(role_name(ObjectRole::fixed) == "static");
}

TEST_CASE("2D hull") {
  std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}};
  const auto hull = convex_hull_2d(pts);
  CHECK(hull.size() == 4);
  CHECK(hull_contains(hull, {0.5, 0.5}));
  CHECK(hull_contains(hull, {1.0, 0.5}));
  CHECK_FALSE(hull_contains(hull, {1.01, 0.5}));
  const auto seg = convex_hull_2d({{0, 0}, {1, 0}});
  CHECK(hull_contains(seg, {0.5, 0.0}));
  CHECK_FALSE(hull_contains(seg, {0.5, 0.1}));
}

TEST_CASE("penetration depth between overlapping boxes") {
  const TriangleMesh a = make_box(Vec3(0.1, 0.1, 0.1));
  CHECK(penetration_depth_between(a, RigidPose::identity(), a, RigidPose::from_translation(Vec3(0.2, 0, 0))) == 0.0);
  const double d = penetration_depth_between(a, RigidPose::identity(), a, RigidPose::from_translation(Vec3(0.09, 0, 0)));
  CHECK(d == doctest::Approx(0.01).epsilon(0.05));
}

TEST_CASE("checker view renders the settled scene") {
  SettleOptions o;
  const SimOutcome out = settle_simulate(single(make_box(Vec3(0.05, 0.05, 0.05))), at(RigidPose::from_translation(Vec3(0, 0, 0.1))), o);
  CHECK(out.rendered.rgb.same_shape(o.camera.width, o.camera.height));
  CHECK(mask_count(coverage_mask(out.rendered)) > 0);
}
