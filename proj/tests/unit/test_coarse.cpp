#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/coarse_align.hpp"
#include "twinforge/error.hpp"
#include "twinforge/primitives.hpp"

using namespace twinforge;

TEST_CASE("cube-yaw hypotheses are distinct rotations, identity first") {
  const auto rots = cube_yaw_rotations();
  REQUIRE(rots.size() == 72);
  CHECK(rotation_angle_between(rots[0], Eigen::Quaterniond::Identity()) < 1e-12);
  for (std::size_t i = 0; i < rots.size(); ++i) {
    for (std::size_t j = i + 1; j < rots.size(); ++j) CHECK(rotation_angle_between(rots[i], rots[j]) > 1e-6);
  }
  const PoseHypothesisSet set = generate_hypotheses(Vec3(0, 0, 0.5), 100, 1);
  CHECK(set.poses.size() == 100);
  for (const auto& p : set.poses) CHECK((p.translation - Vec3(0, 0, 0.5)).norm() < 1e-15);
}

TEST_CASE("area resize preserves the mean") {
  Image<double> img(7, 5);
  Rng rng(1);
  double sum = 0;
  for (auto& v : img.values) sum += (v = rng.uniform());
  const Image<double> small = resize_area(img, 3, 2);
  double s2 = 0;
  for (double v : small.values) s2 += v;
  CHECK(s2 / 6.0 == doctest::Approx(sum / 35.0));
}

TEST_CASE("cosine similarity") {
  FeatureVector a{{1, 0, 0}}, b{{1, 1, 0}}, z{{0, 0, 0}}, c{{1, 0}};
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(cosine_similarity(a, z), InvalidInput);
  CHECK_THROWS_AS(cosine_similarity(a, c), InvalidInput);
  CHECK(grid_descriptor(ColorImage(16, 16, Color(0.2f, 0.4f, 0.6f))).size() == GridDescriptor{}.dimension());
}

TEST_CASE("an observation rendered at a hypothesis selects that hypothesis") {
  const TriangleMesh mesh = make_primitive("box:0.12,0.08,0.05");
  const CameraIntrinsics k{320.0, 320.0, 128.0, 128.0, 256, 256};
  const PoseHypothesisSet set = generate_hypotheses(Vec3(0.01, -0.02, 0.5), 72, 0);
  // At the hypothesis window's own intrinsics the render is reproduced
  // exactly; at the larger frame only resampling differs.
  const CameraIntrinsics window = hypothesis_intrinsics(mesh, Vec3(0.01, -0.02, 0.5), k, CoarseAlignOptions{});
  for (std::size_t truth : {5u, 40u}) {
    for (const CameraIntrinsics& view : {k, window}) {
      const RenderedView obs = render(mesh, set.poses[truth], view);
      const CoarseAlignment c = select_coarse_pose(mesh, set, obs.rgb, coverage_mask(obs), view, GridDescriptor{});
      CHECK(c.similarity > (view.width == window.width ? 0.99 : 0.9));
      CHECK(rotation_angle_between(c.best_pose.rotation, set.poses[truth].rotation) < 1e-9);
      CHECK(c.all_scores.size() == 72);
      CHECK(!c.rendered_partial.empty());
    }
  }
}

TEST_CASE("hypothesis window centres the object") {
  const TriangleMesh mesh = make_primitive("box:0.1,0.1,0.1");
  const CameraIntrinsics k{560.0, 560.0, 320.0, 240.0, 640, 480};
  CoarseAlignOptions o;
  const CameraIntrinsics h = hypothesis_intrinsics(mesh, Vec3(0.05, 0.0, 0.5), k, o);
  CHECK(h.width == 2 * o.object_pixels);
  CHECK(h.height == 2 * o.object_pixels);
  // The anchor projects to the window centre.
  CHECK(h.fx * 0.05 / 0.5 + h.cx == doctest::Approx(o.object_pixels));
  CHECK(h.cy == doctest::Approx(o.object_pixels));
}
