#include <cmath>
#include <optional>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/primitives.hpp"
#include "twinforge/render.hpp"

using namespace twinforge;

TEST_CASE("rendered depth matches a ray-cast oracle") {
  const CameraIntrinsics k{80.0, 80.0, 32.0, 32.0, 64, 64};
  Rng rng(11);
  std::size_t covered = 0, agree = 0;
  for (const char* spec : {"box:0.1,0.08,0.06", "cylinder:0.04,0.1", "ramp:0.1,0.08,0.05"}) {
    const TriangleMesh mesh = make_primitive(spec);
    const RigidPose pose(rng.rotation(), Vec3(0.0, 0.0, 0.4));
    const TriangleMesh posed = transform_mesh(mesh, pose);
    const RenderedView view = render(mesh, pose, k);
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const double z = view.depth.at(u, v);
        if (!valid_depth(z)) continue;
        ++covered;
        const auto hit = testutil::ray_depth(posed, Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0));
        if (hit && std::abs(*hit - z) < 1e-4) ++agree;
      }
    }
  }
  REQUIRE(covered > 1000);
  CHECK(static_cast<double>(agree) >= 0.99 * covered);
}

TEST_CASE("background stays empty and near plane clips") {
  const CameraIntrinsics k{50.0, 50.0, 16.0, 16.0, 32, 32};
  const TriangleMesh box = make_box(Vec3(0.1, 0.1, 0.1));
  const RenderedView behind = render(box, RigidPose::from_translation(Vec3(0, 0, -1)), k);
  CHECK(mask_count(coverage_mask(behind)) == 0);
  const RenderedView front = render(box, RigidPose::from_translation(Vec3(0, 0, 0.5)), k);
  CHECK(mask_count(coverage_mask(front)) > 0);
  CHECK(front.rgb.at(0, 0).isApprox(RenderOptions{}.background));
}

TEST_CASE("labeled scene render reports the nearest object") {
  const CameraIntrinsics k{100.0, 100.0, 20.0, 20.0, 40, 40};
  const TriangleMesh a = make_box(Vec3(0.2, 0.2, 0.01)), b = make_box(Vec3(0.05, 0.05, 0.01));
  // Camera at z = 1 looking down: camera z axis is world -z.
  const RigidPose view(Mat3(Eigen::AngleAxisd(M_PI, Vec3::UnitX())), Vec3(0, 0, 1));
  const std::vector<PosedMesh> objects = {{&a, RigidPose::identity()}, {&b, RigidPose::from_translation(Vec3(0, 0, 0.01))}};
  const LabeledView lv = render_scene_labeled(objects, view, k);
  CHECK(lv.object_id.at(20, 20) == 1);
  CHECK(lv.view.depth.at(20, 20) == doctest::Approx(1.0 - 0.02));
  CHECK(lv.object_id.at(12, 20) == 0);
  CHECK(lv.object_id.at(0, 0) == -1);
}
