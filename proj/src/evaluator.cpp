#include "twinforge/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "twinforge/parallel.hpp"

namespace twinforge {

namespace {

const std::map<std::string, std::size_t>& arities() {
  static const std::map<std::string, std::size_t> a = {{"inside", 2}, {"on_top", 2},  {"upright", 1},
                                                        {"upside_down", 1}, {"bridges", 3}, {"in_gap", 3}};
  return a;
}

struct Placed {
  std::vector<Vec3> vertices;  // world
  Aabb box;
  Vec3 com;
  Eigen::Quaterniond rotation;
};

Placed place(const SceneObject& object, const RigidPose& pose) {
  Placed p;
  p.box = Aabb::empty_box();
  for (const auto& v : unique_vertices(object.mesh)) {
    p.vertices.push_back(pose * v);
    p.box.expand(p.vertices.back());
  }
  p.com = pose * mass_properties(object.mesh).center_of_mass;
  p.rotation = pose.rotation;
  return p;
}

bool in_xy(const Vec3& p, const Aabb& box, double tol) {
  return p.x() >= box.min.x() - tol && p.x() <= box.max.x() + tol && p.y() >= box.min.y() - tol &&
         p.y() <= box.max.y() + tol;
}

/// Some vertex of `a` rests on the top face of `b`.
bool touches_top(const Placed& a, const Placed& b, double tol) {
  return std::any_of(a.vertices.begin(), a.vertices.end(), [&](const Vec3& v) {
    return in_xy(v, b.box, 1e-6) && std::abs(v.z() - b.box.max.z()) <= tol;
  });
}

double up_angle_deg(const Eigen::Quaterniond& q, double sign) {
  const double c = std::clamp(sign * (q * Vec3::UnitZ()).z(), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace

void PlacementPredicate::validate() const {
  const auto it = arities().find(name);
  if (it == arities().end()) throw InvalidInput("unknown predicate: " + name);
  if (args.size() != it->second) {
    throw InvalidInput("predicate " + name + " takes " + std::to_string(it->second) + " arguments");
  }
}

std::string PlacementPredicate::to_string() const {
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i];
  return s + ")";
}

bool evaluate_predicate(const SceneTwin& scene, const SimOutcome& outcome, const PlacementPredicate& predicate,
                        const PredicateTolerances& tol) {
  predicate.validate();
  std::vector<std::size_t> idx;
  for (const auto& name : predicate.args) idx.push_back(scene.index_of(name));
  if (!outcome.stable || outcome.penetration) return false;
  if (outcome.settled_poses.size() != scene.objects.size()) {
    throw InvalidInput("outcome does not match the scene");
  }
  std::vector<Placed> obj;
  for (std::size_t i : idx) obj.push_back(place(scene.objects[i], outcome.settled_poses[i]));
  const std::string& n = predicate.name;

  if (n == "upright") return up_angle_deg(obj[0].rotation, 1.0) <= tol.axis_deg;
  if (n == "upside_down") return up_angle_deg(obj[0].rotation, -1.0) <= tol.axis_deg;
  if (n == "inside") {
    const std::size_t a = idx[0];
    const PointCloud samples = transform_cloud(sample_mesh_surface(scene.objects[a].mesh, tol.surface_samples, 0),
                                               outcome.settled_poses[a]);
    const Aabb& b = obj[1].box;
    std::size_t in = 0;
    for (const auto& p : samples.points) {
      // The rim plane is the top of B's box.
      if (b.contains(p, 1e-6)) ++in;
    }
    return static_cast<double>(in) >= tol.inside_fraction * static_cast<double>(samples.size());
  }
  if (n == "on_top") {
    // Resting on B's top face with nothing hanging below it.
    double lowest = 1e30;
    for (const auto& v : obj[0].vertices) lowest = std::min(lowest, v.z());
    const double top = obj[1].box.max.z();
    return touches_top(obj[0], obj[1], tol.contact) && lowest >= top - tol.contact && obj[0].com.z() > top;
  }
  if (n == "bridges") {
    return touches_top(obj[0], obj[1], tol.contact) && touches_top(obj[0], obj[2], tol.contact);
  }
  // in_gap: between the facing sides of B and C, below both tops.
  Eigen::Vector2d axis(obj[2].box.center().x() - obj[1].box.center().x(),
                       obj[2].box.center().y() - obj[1].box.center().y());
  if (axis.norm() < 1e-12) return false;
  axis.normalize();
  auto proj = [&](const Vec3& p) { return axis.x() * p.x() + axis.y() * p.y(); };
  double b_far = -1e30, c_near = 1e30;
  for (const auto& v : obj[1].vertices) b_far = std::max(b_far, proj(v));
  for (const auto& v : obj[2].vertices) c_near = std::min(c_near, proj(v));
  const double s = proj(obj[0].com);
  return s > b_far && s < c_near && obj[0].com.z() < std::min(obj[1].box.max.z(), obj[2].box.max.z());
}

GeometricEvaluator::GeometricEvaluator(Goal goal, PredicateTolerances tol)
    : goal_(std::move(goal)), tol_(tol) {
  if (goal_.all_of.empty()) throw InvalidInput("goal has no predicates");
  for (const auto& p : goal_.all_of) p.validate();
}

bool GeometricEvaluator::evaluate(const SceneTwin& scene, const SimOutcome& outcome, const std::string&) const {
  return std::all_of(goal_.all_of.begin(), goal_.all_of.end(),
                     [&](const PlacementPredicate& p) { return evaluate_predicate(scene, outcome, p, tol_); });
}

void label_samples(const SceneTwin& scene, std::vector<StrategySample>& samples, const Simulator& simulator,
                   const OutcomeEvaluator& evaluator, const std::string& instruction) {
  parallel_for(samples.size(), [&](std::size_t i) {
    StrategySample& s = samples[i];
    s.failure_reason.clear();
    try {
      s.outcome = simulator.simulate(scene, s);
      if (s.outcome->penetration) {
        s.weak_label = false;
        s.failure_reason = "penetration";
        return;
      }
      s.weak_label = evaluator.evaluate(scene, *s.outcome, instruction);
      if (!*s.weak_label) s.failure_reason = s.outcome->stable ? "goal-not-met" : "unstable";
    } catch (const std::exception& e) {
      s.outcome.reset();
      s.weak_label = false;
      s.failure_reason = std::string("simulation-error: ") + e.what();
    }
  });
}

}  // namespace twinforge
