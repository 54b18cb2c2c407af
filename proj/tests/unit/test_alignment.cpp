#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/benchmark.hpp"
#include "twinforge/error.hpp"
#include "twinforge/primitives.hpp"

using namespace twinforge;

TEST_CASE("success thresholds") {
  const RigidPose truth = RigidPose::from_translation(Vec3(0, 0, 0.5));
  const auto rotated = [&](double deg, const Vec3& dt) {
    return RigidPose::from_axis_angle(Vec3::UnitZ(), deg * M_PI / 180.0, truth.translation + dt);
  };
  CHECK(alignment_success(rotated(14.9, Vec3::Zero()), truth, 0.1));
  CHECK_FALSE(alignment_success(rotated(15.1, Vec3::Zero()), truth, 0.1));
  CHECK(alignment_success(rotated(0, Vec3(0.0099, 0, 0)), truth, 0.05));
  CHECK_FALSE(alignment_success(rotated(0, Vec3(0.011, 0, 0)), truth, 0.05));
  CHECK(alignment_success(rotated(0, Vec3(0.019, 0, 0)), truth, 0.2));
  CHECK_THROWS_AS(alignment_success(truth, truth, 0.0), InvalidInput);
}

TEST_CASE("two-stage alignment recovers a random pose") {
  const TriangleMesh mesh = make_primitive(benchmark_primitive("box"));
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const AlignmentTrial trial = make_alignment_trial(mesh, benchmark_intrinsics(), seed);
    const AlignmentResult r = two_stage_align(mesh, trial.observation);
    const TrialOutcome o = score_alignment(r, trial);
    if (o.success) {
      ++ok;
      CHECK(o.rmse < 0.01);
    }
  }
  CHECK(ok >= 2);
}

TEST_CASE("direct alignment registers an oblique box up to its symmetries") {
  const TriangleMesh mesh = make_primitive(benchmark_primitive("box"));
  AlignmentTrial trial = make_alignment_trial(mesh, benchmark_intrinsics(), 0);
  // Unrotated, off the optical axis so three faces are visible.
  const Vec3 centre = compute_aabb(mesh).center();
  trial.truth = RigidPose::from_translation(Vec3(0.12, -0.12, 0.45) - centre);
  const RenderedView view = render(mesh, trial.truth, benchmark_intrinsics());
  trial.observation.rgb = view.rgb;
  trial.observation.depth = view.depth;
  trial.observation.mask = coverage_mask(view);
  const AlignmentResult r = direct_align(mesh, trial.observation);
  REQUIRE(r.ok());
  CHECK(r.registration.rmse < 0.005);
  // Geometry alone cannot tell the box from its half turns about its axes.
  double best = 180.0;
  for (const Vec3& axis : {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}) {
    for (double angle : {0.0, M_PI}) {
      const Eigen::Quaterniond flip(Eigen::AngleAxisd(angle, axis));
      best = std::min(best, rotation_angle_between(r.pose.rotation, trial.truth.rotation * flip) * 180.0 / M_PI);
    }
  }
  CHECK(best < 5.0);
  CHECK((r.pose * centre - trial.truth * centre).norm() < 0.005);
}

TEST_CASE("empty mask is a segmentation failure, not a crash") {
  const TriangleMesh mesh = make_primitive(benchmark_primitive("cup"));
  AlignmentTrial trial = make_alignment_trial(mesh, benchmark_intrinsics(), 1);
  trial.observation.mask = BinaryMask(trial.observation.mask.width, trial.observation.mask.height);
  const AlignmentResult r = two_stage_align(mesh, trial.observation);
  REQUIRE_FALSE(r.ok());
  CHECK(r.failure->reason == "segmentation-too-small");
  CHECK_FALSE(direct_align(mesh, trial.observation).ok());
}

TEST_CASE("benchmark report has one row per object and arm") {
  BenchmarkConfig config;
  config.objects = {"box", "cylinder"};
  config.trials = 1;
  const BenchmarkReport report = run_alignment_benchmark(config);
  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[0].arm == "two-stage");
  CHECK(report.rows[1].arm == "direct");
  const auto dir = testutil::temp_dir("bench");
  write_benchmark_csv(dir / "b.csv", report);
  std::ifstream in(dir / "b.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "object,arm,trials,valid_samples,success_rate,mean_rmse");
}
