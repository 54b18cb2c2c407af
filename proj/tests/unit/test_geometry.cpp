#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/error.hpp"
#include "twinforge/io.hpp"
#include "twinforge/primitives.hpp"

using namespace twinforge;

TEST_CASE("pose composition and inverse match 4x4 matrices") {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const RigidPose a = testutil::random_pose(rng), b = testutil::random_pose(rng);
    CHECK(((a * b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.inverse().matrix() - a.matrix().inverse()).cwiseAbs().maxCoeff() < 1e-12);
    const Vec3 p(rng.uniform(), rng.uniform(), rng.uniform());
    const Eigen::Vector4d h = a.matrix() * p.homogeneous();
    CHECK(((a * p) - h.head<3>()).norm() < 1e-12);
    CHECK(testutil::pose_gap(RigidPose::from_array(a.to_array()), a) < 1e-12);
    CHECK(testutil::pose_gap(RigidPose::from_matrix(a.matrix()), a) < 1e-12);
  }
}

TEST_CASE("rotation distances") {
  const auto q = Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Vec3::UnitY()));
  CHECK(rotation_angle_between(Eigen::Quaterniond::Identity(), q) == doctest::Approx(0.3));
  const Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK(quaternion_chordal_distance(q, neg) == doctest::Approx(0.0));
  // Chordal distance of angle theta is 2 sin(theta / 4).
  CHECK(quaternion_chordal_distance(Eigen::Quaterniond::Identity(), q) == doctest::Approx(2.0 * std::sin(0.3 / 4.0)));
  CHECK_THROWS_AS(quaternion_chordal_distance(Eigen::Quaterniond(2, 0, 0, 0), q), InvalidInput);
}

TEST_CASE("backprojection follows the pinhole model") {
  const CameraIntrinsics k{100.0, 120.0, 4.0, 3.0, 8, 6};
  DepthImage depth(8, 6);
  depth.at(5, 2) = 2.0;
  depth.at(1, 4) = 0.5;
  BinaryMask mask(8, 6);
  mask.at(5, 2) = 1;
  const PointCloud all = backproject(depth, k);
  REQUIRE(all.size() == 2);
  const PointCloud masked = backproject(depth, k, &mask);
  REQUIRE(masked.size() == 1);
  CHECK((masked.points[0] - Vec3((5 - 4.0) * 2.0 / 100.0, (2 - 3.0) * 2.0 / 120.0, 2.0)).norm() < 1e-12);
}

TEST_CASE("intrinsics validation") {
  CHECK_THROWS_AS((CameraIntrinsics{0.0, 1.0, 1.0, 1.0, 4, 4}).validate(), InvalidInput);
  CHECK_THROWS_AS((CameraIntrinsics{1.0, 1.0, 9.0, 1.0, 4, 4}).validate(), InvalidInput);
  CHECK_NOTHROW((CameraIntrinsics{1.0, 1.0, 9.0, 1.0, 4, 4}).validate_projection());
}

TEST_CASE("mass properties of primitives") {
  const auto box = make_box(Vec3(0.1, 0.2, 0.3));
  const MassProperties m = mass_properties(box);
  CHECK(m.volume == doctest::Approx(0.006).epsilon(1e-9));
  CHECK((m.center_of_mass - Vec3(0.0, 0.0, 0.15)).norm() < 1e-12);
  const auto cup = make_cup(0.04, 0.09, 0.005, 64);
  // Polygonal cup: outer prism minus inner prism, 64-gon area = 32 r^2 sin(2 pi / 64).
  auto area = [](double r) { return 32.0 * r * r * std::sin(2.0 * M_PI / 64.0); };
  const double expected = area(0.04) * 0.09 - area(0.035) * 0.085;
  CHECK(mass_properties(cup).volume == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("surface samples lie on the mesh") {
  const auto mesh = make_cylinder(0.05, 0.1);
  std::vector<std::size_t> tris;
  const PointCloud s = sample_mesh_surface(mesh, 500, 3, &tris);
  REQUIRE(s.size() == 500);
  REQUIRE(tris.size() == 500);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& t = mesh.triangles[tris[i]];
    const Vec3 n = mesh.triangle_normal(tris[i]);
    CHECK(std::abs(n.dot(s.points[i] - mesh.vertices[t[0]])) < 1e-12);
  }
  // Same seed, same samples.
  CHECK(sample_mesh_surface(mesh, 500, 3).points == s.points);
}

TEST_CASE("mesh validation rejects bad indices and degenerate triangles") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.triangles = {Eigen::Vector3i(0, 1, 3)};
  CHECK_THROWS_AS(m.validate(), InvalidInput);
  m.triangles = {Eigen::Vector3i(0, 1, 1)};
  CHECK_THROWS_AS(m.validate(), InvalidInput);
  m.remove_degenerate();
  CHECK(m.empty());
}

TEST_CASE("primitive specs") {
  CHECK(compute_aabb(make_primitive("box:0.1,0.2,0.3")).extent().isApprox(Vec3(0.1, 0.2, 0.3)));
  CHECK(primitive_height(make_primitive("open_box:0.1,0.1,0.07,0.005")) == doctest::Approx(0.07));
  CHECK_THROWS_AS(make_primitive("box:0.1"), InvalidInput);
  CHECK_THROWS_AS(make_primitive("sphere:1"), InvalidInput);
  CHECK_THROWS_AS(make_primitive("box:-1,1,1"), InvalidInput);
}

TEST_CASE("image and mesh files round-trip") {
  const auto dir = testutil::temp_dir("io");
  ColorImage rgb(5, 4);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb.values[i] = Color(i / 20.0f, 0.5f, 1.0f - i / 20.0f);
  io::write_ppm(dir / "a.ppm", rgb);
  const ColorImage back = io::read_ppm(dir / "a.ppm");
  REQUIRE(back.same_shape(5, 4));
  for (std::size_t i = 0; i < rgb.size(); ++i) CHECK((back.values[i] - rgb.values[i]).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);

  DepthImage depth(5, 4);
  depth.values[3] = 0.8125;
  depth.values[7] = 1.5;
  io::write_depth_raw(dir / "d.tfd", depth);
  CHECK(io::read_depth(dir / "d.tfd").values == depth.values);
  io::write_depth_pgm(dir / "d.pgm", depth, 0.001);
  const DepthImage pgm = io::read_depth(dir / "d.pgm", 0.001);
  CHECK(pgm.values[3] == doctest::Approx(0.813).epsilon(1e-9));
  CHECK(pgm.values[0] == 0.0);

  BinaryMask mask(5, 4);
  mask.values[2] = 1;
  io::write_mask(dir / "m.pgm", mask);
  CHECK(io::read_mask(dir / "m.pgm").values == mask.values);

  const TriangleMesh box = make_box(Vec3(0.1, 0.1, 0.1));
  for (const char* name : {"b.obj", "b.ply"}) {
    io::write_mesh(dir / name, box);
    const TriangleMesh m = io::read_mesh(dir / name);
    CHECK(m.triangles == box.triangles);
    REQUIRE(m.vertices.size() == box.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((m.vertices[i] - box.vertices[i]).norm() < 1e-9);
  }
  CHECK_THROWS_AS(io::read_ppm(dir / "missing.ppm"), IoError);
  CHECK_THROWS_AS(io::read_mesh(dir / "a.ppm"), IoError);
}
