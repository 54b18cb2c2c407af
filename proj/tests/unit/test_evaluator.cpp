#include "doctest.h"
#include "helpers.hpp"
#include "twinforge/error.hpp"
#include "twinforge/evaluator.hpp"
#include "twinforge/primitives.hpp"
#include "twinforge/strategy.hpp"

using namespace twinforge;

namespace {

SceneTwin scene() {
  SceneTwin t;
  t.objects.push_back({"a", make_box(Vec3(0.04, 0.04, 0.04)), RigidPose::identity(), default_material(), ObjectRole::manipulated});
  t.objects.push_back({"box", make_open_box(Vec3(0.12, 0.12, 0.06), 0.005), RigidPose::identity(), default_material(), ObjectRole::interactive});
  t.objects.push_back({"b", make_box(Vec3(0.1, 0.1, 0.05)), RigidPose::from_translation(Vec3(0.3, 0, 0)), default_material(), ObjectRole::fixed});
  t.objects.push_back({"c", make_box(Vec3(0.1, 0.1, 0.05)), RigidPose::from_translation(Vec3(0.5, 0, 0)), default_material(), ObjectRole::fixed});
  return t;
}

SimOutcome with_a_at(const SceneTwin& t, const RigidPose& p) {
  SimOutcome o;
  for (const auto& obj : t.objects) o.settled_poses.push_back(obj.pose);
  o.settled_poses[0] = p;
  o.stable = true;
  return o;
}

bool holds(const SceneTwin& t, const SimOutcome& o, const std::string& name, std::vector<std::string> args) {
  return evaluate_predicate(t, o, PlacementPredicate{name, std::move(args)});
}

}  // namespace

TEST_CASE("predicate arities") {
  CHECK_THROWS_AS((PlacementPredicate{"inside", {"a"}}).validate(), InvalidInput);
  CHECK_THROWS_AS((PlacementPredicate{"levitate", {"a"}}).validate(), InvalidInput);
  CHECK((PlacementPredicate{"on_top", {"a", "b"}}).to_string() == "on_top(a,b)");
}

TEST_CASE("geometric predicates") {
  const SceneTwin t = scene();
  const SimOutcome inside = with_a_at(t, RigidPose::from_translation(Vec3(0, 0, 0.005)));
  CHECK(holds(t, inside, "inside", {"a", "box"}));
  CHECK_FALSE(holds(t, inside, "on_top", {"a", "b"}));
  CHECK(holds(t, inside, "upright", {"a"}));
  CHECK_FALSE(holds(t, inside, "upside_down", {"a"}));

  const SimOutcome on_b = with_a_at(t, RigidPose::from_translation(Vec3(0.3, 0, 0.05)));
  CHECK(holds(t, on_b, "on_top", {"a", "b"}));
  CHECK_FALSE(holds(t, on_b, "inside", {"a", "box"}));

  // Hanging over the edge of b, partly below its top.
  const SimOutcome hanging = with_a_at(t, RigidPose::from_axis_angle(Vec3::UnitY(), 0.3, Vec3(0.36, 0, 0.04)));
  CHECK_FALSE(holds(t, hanging, "on_top", {"a", "b"}));

  const SimOutcome flipped = with_a_at(t, RigidPose::from_axis_angle(Vec3::UnitX(), M_PI, Vec3(0.3, 0, 0.09)));
  CHECK(holds(t, flipped, "upside_down", {"a"}));

  // Spanning the gap between b and c.
  SceneTwin wide = t;
  wide.objects[0].mesh = make_box(Vec3(0.2, 0.04, 0.02));
  const SimOutcome bridge = with_a_at(wide, RigidPose::from_translation(Vec3(0.4, 0, 0.05)));
  CHECK(holds(wide, bridge, "bridges", {"a", "b", "c"}));
  const SimOutcome gap = with_a_at(t, RigidPose::from_translation(Vec3(0.4, 0, 0.0)));
  CHECK(holds(t, gap, "in_gap", {"a", "b", "c"}));
  CHECK_FALSE(holds(t, on_b, "in_gap", {"a", "b", "c"}));

  SimOutcome unstable = on_b;
  unstable.stable = false;
  CHECK_FALSE(holds(t, unstable, "on_top", {"a", "b"}));
  SimOutcome pen = on_b;
  pen.penetration = true;
  CHECK_FALSE(holds(t, pen, "on_top", {"a", "b"}));
  CHECK_THROWS(holds(t, on_b, "on_top", {"a", "nobody"}));
}

TEST_CASE("goal conjunction") {
  const SceneTwin t = scene();
  Goal g;
  g.all_of = {{"on_top", {"a", "b"}}, {"upside_down", {"a"}}};
  const GeometricEvaluator e(g);
  CHECK_FALSE(e.evaluate(t, with_a_at(t, RigidPose::from_translation(Vec3(0.3, 0, 0.05))), ""));
  CHECK(e.evaluate(t, with_a_at(t, RigidPose::from_axis_angle(Vec3::UnitX(), M_PI, Vec3(0.3, 0, 0.09))), ""));
  CHECK_THROWS_AS(GeometricEvaluator(Goal{}), InvalidInput);
}

namespace {

class Scripted : public Simulator {
 public:
  SimOutcome simulate(const SceneTwin& scene, const StrategySample& s) const override {
    if (s.sample_id == 2) throw SimulationError("boom");
    SimOutcome o;
    for (const auto& obj : scene.objects) o.settled_poses.push_back(obj.pose);
    o.settled_poses[0] = s.object_pose;
    o.stable = true;
    o.penetration = s.sample_id == 1;
    return o;
  }
};

class CountingEvaluator : public OutcomeEvaluator {
 public:
  mutable std::atomic<int> calls{0};
  bool evaluate(const SceneTwin&, const SimOutcome&, const std::string&) const override {
    ++calls;
    return true;
  }
};

}  // namespace

TEST_CASE("labeling handles penetration and simulator errors") {
  const SceneTwin t = scene();
  std::vector<StrategySample> s(4);
  for (int i = 0; i < 4; ++i) s[i].sample_id = i;
  CountingEvaluator e;
  label_samples(t, s, Scripted{}, e, "");
  CHECK(*s[0].weak_label);
  CHECK_FALSE(*s[1].weak_label);
  CHECK(s[1].failure_reason == "penetration");
  CHECK_FALSE(*s[2].weak_label);
  CHECK(s[2].failure_reason.rfind("simulation-error", 0) == 0);
  CHECK(*s[3].weak_label);
  CHECK(e.calls == 2);
}
