#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "gp_reference.hpp"
#include "helpers.hpp"
#include "twinforge/error.hpp"
#include "twinforge/gp.hpp"

using namespace twinforge;
using namespace gpref;

namespace {

std::vector<RigidPose> cluster_poses(Rng& rng, std::size_t n) {
  std::vector<RigidPose> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back(testutil::random_pose(rng, 0.08));
  return p;
}

}  // namespace

TEST_CASE("kernel values") {
  Se3KernelParams p;
  const RigidPose a = RigidPose::identity();
  const RigidPose b = RigidPose::from_axis_angle(Vec3::UnitZ(), 0.4, Vec3(0.03, 0.0, 0.04));
  const double dq = 2.0 * std::sin(0.1);
  const double expected = std::exp(-0.0025 / (2 * 0.0025)) * std::exp(-dq * dq / (2 * 0.25));
  CHECK(se3_kernel(a, b, p) == doctest::Approx(expected));
  CHECK(se3_kernel(a, a, p) == doctest::Approx(1.0));
  // Quaternion sign does not matter.
  RigidPose c = b;
  c.rotation.coeffs() *= -1.0;
  CHECK(se3_kernel(a, b, p) == doctest::Approx(se3_kernel(a, c, p)));
  p.translation_length = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
}

TEST_CASE("Gram matrices factor on random pose sets") {
  Rng rng(1);
  for (int s = 0; s < 100; ++s) {
    const Eigen::MatrixXd k = se3_gram(cluster_poses(rng, 30), Se3KernelParams{});
    CHECK(Eigen::LLT<Eigen::MatrixXd>(k).info() == Eigen::Success);
  }
}

TEST_CASE("Laplace fit and predictions match the dense reference") {
  Rng rng(2);
  Se3KernelParams p;
  for (int s = 0; s < 10; ++s) {
    const std::size_t n = 5 + 5 * (s % 6);
    const auto poses = cluster_poses(rng, n);
    std::vector<int> y;
    for (const auto& q : poses) y.push_back(q.translation.x() + 0.02 * rng.normal() > 0 ? 1 : 0);
    y[0] = 1;
    y[1] = 0;
    const GpModel m = gp_fit(poses, y, p);
    const DenseReference r = dense_fit(poses, y, p);
    CHECK((m.mode - r.f).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(m.log_marginal == doctest::Approx(r.log_marginal).epsilon(1e-6));
    for (int t = 0; t < 5; ++t) {
      const RigidPose x = testutil::random_pose(rng, 0.1);
      const GpPrediction a = gp_predict(m, x), b = dense_predict(r, poses, x, p);
      CHECK(std::abs(a.mean - b.mean) < 1e-6);
      CHECK(std::abs(a.variance - b.variance) < 1e-6);
      CHECK(std::abs(a.probability - b.probability) < 1e-6);
    }
  }
}

TEST_CASE("far-field predictions revert to one half") {
  Rng rng(3);
  const auto poses = cluster_poses(rng, 20);
  std::vector<int> y;
  for (std::size_t i = 0; i < poses.size(); ++i) y.push_back(i % 3 == 0);
  const GpModel m = gp_fit(poses, y);
  CHECK(predict_prob(m, RigidPose::from_translation(Vec3(5, 5, 5))) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("degenerate label sets") {
  Rng rng(4);
  const auto poses = cluster_poses(rng, 8);
  const GpModel all_good = gp_fit(poses, std::vector<int>(8, 1));
  CHECK(all_good.degenerate);
  CHECK(predict_prob(all_good, poses[0]) == doctest::Approx(9.0 / 10.0));
  const GpModel none = gp_fit(poses, std::vector<int>(8, 0));
  CHECK(predict_prob(none, poses[0]) == doctest::Approx(1.0 / 10.0));
  CHECK_THROWS_AS(gp_fit(poses, std::vector<int>(3, 1)), InvalidInput);
  CHECK_THROWS_AS(gp_fit(std::vector<RigidPose>{}, std::vector<int>{}), InvalidInput);
}

TEST_CASE("ranking is argmax-consistent with id tie-breaks") {
  Rng rng(5);
  std::vector<StrategySample> samples;
  for (int i = 0; i < 30; ++i) {
    StrategySample s;
    s.sample_id = i;
    const bool good = i % 2 == 0;
    s.object_pose = RigidPose::from_translation(Vec3(good ? 0.0 : 0.3, 0.0, 0.0) + 0.01 * Vec3(rng.normal(), rng.normal(), 0));
    s.weak_label = good;
    samples.push_back(s);
  }
  const GpModel m = gp_fit(samples);
  const Ranking r = rank_and_select(m, samples);
  REQUIRE(r.ranked.size() == samples.size());
  for (std::size_t i = 1; i < r.ranked.size(); ++i) CHECK(*r.ranked[i - 1].success_prob >= *r.ranked[i].success_prob);
  CHECK(*r.best().weak_label);
  CHECK(r.priority.size() == 15);
  for (const auto& s : r.priority) CHECK(*s.weak_label);
  // Identical poses tie on probability; the lower id wins.
  std::vector<StrategySample> twins(2, samples[0]);
  twins[0].sample_id = 7;
  twins[1].sample_id = 3;
  CHECK(rank_and_select(m, twins).best().sample_id == 3);
}

TEST_CASE("grid search never lowers the marginal likelihood") {
  Rng rng(6);
  const auto poses = cluster_poses(rng, 20);
  std::vector<int> y;
  for (const auto& q : poses) y.push_back(q.translation.y() > 0);
  const GpModel plain = gp_fit(poses, y);
  GpFitOptions o;
  o.grid_search = true;
  const GpModel tuned = gp_fit(poses, y, {}, o);
  CHECK(tuned.log_marginal >= plain.log_marginal - 1e-12);
}
