#include "twinforge/scene_gen.hpp"

#include <cmath>

#include "twinforge/benchmark.hpp"
#include "twinforge/grasp.hpp"
#include "twinforge/io.hpp"
#include "twinforge/primitives.hpp"
#include "twinforge/random.hpp"
#include "twinforge/render.hpp"

namespace twinforge {

namespace fs = std::filesystem;

namespace {

constexpr double kDegToRad = M_PI / 180.0;

struct Placement {
  ObjectSpec spec;
  TriangleMesh mesh;
  RigidPose pose;
};

struct Recipe {
  std::vector<Placement> objects;  // manipulated object first
  std::size_t target = 1;
  Goal goal;
  std::string instruction;
};

Placement make_object(const std::string& name, ObjectRole role, const std::string& primitive,
                      const std::string& material, const RigidPose& pose) {
  Placement p;
  p.spec.name = name;
  p.spec.role = role;
  p.spec.mesh = "generate:" + primitive;
  p.spec.material = material;
  p.mesh = make_primitive(primitive);
  p.pose = pose;
  if (role == ObjectRole::fixed) {
    p.spec.pose = pose;
  } else {
    p.spec.mask = name + "_mask.pgm";
  }
  p.spec.ground_truth_pose = pose;
  return p;
}

RigidPose yawed(double yaw, const Vec3& t) { return RigidPose::from_axis_angle(Vec3::UnitZ(), yaw, t); }

/// Manipulated object resting upright beside the target.
RigidPose beside(Rng& rng, const Vec3& target, double distance) {
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  const Vec3 at = target + distance * Vec3(std::cos(angle), std::sin(angle), 0.0);
  return yawed(rng.uniform(0.0, 2.0 * M_PI), Vec3(at.x(), at.y(), 0.0));
}

Recipe make_recipe(const std::string& name, Rng& rng) {
  Recipe r;
  const Vec3 centre(rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04), 0.0);
  const RigidPose target_pose = yawed(rng.uniform(0.0, 2.0 * M_PI), centre);
  auto predicate = [](std::string n, std::vector<std::string> args) { return PlacementPredicate{std::move(n), std::move(args)}; };
  if (name == "cube-into-box") {
    r.objects.push_back(make_object("cube", ObjectRole::manipulated, "box:0.05,0.05,0.05", "wood", beside(rng, centre, 0.17)));
    r.objects.push_back(make_object("box", ObjectRole::interactive, "open_box:0.12,0.12,0.06,0.005", "cardboard", target_pose));
    r.goal.all_of = {predicate("inside", {"cube", "box"})};
    r.instruction = "put the cube into the box";
  } else if (name == "cube-onto-cube") {
    r.objects.push_back(make_object("cube", ObjectRole::manipulated, "box:0.05,0.05,0.05", "wood", beside(rng, centre, 0.15)));
    r.objects.push_back(make_object("base", ObjectRole::interactive, "box:0.06,0.06,0.06", "wood", target_pose));
    r.goal.all_of = {predicate("on_top", {"cube", "base"})};
    r.instruction = "stack the small cube onto the large cube";
  } else if (name == "cup-upside-down-on-box") {
    r.objects.push_back(make_object("cup", ObjectRole::manipulated, "cup:0.04,0.09,0.005", "ceramic", beside(rng, centre, 0.2)));
    r.objects.push_back(make_object("box", ObjectRole::interactive, "box:0.16,0.12,0.05", "wood", target_pose));
    r.goal.all_of = {predicate("on_top", {"cup", "box"}), predicate("upside_down", {"cup"})};
    r.instruction = "place the cup upside down on the box";
  } else {
    // A single primitive to be placed upright on a table.
    const std::string primitive = benchmark_primitive(name);
    constexpr double kTableTop = 0.02;
    const RigidPose on_table = yawed(rng.uniform(0.0, 2.0 * M_PI),
                                     Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), kTableTop));
    r.objects.push_back(make_object("object", ObjectRole::manipulated, primitive, "plastic", on_table));
    r.objects.push_back(make_object("table", ObjectRole::fixed, "box:0.5,0.5,0.02", "wood", RigidPose::identity()));
    r.goal.all_of = {predicate("on_top", {"object", "table"}), predicate("upright", {"object"})};
    r.instruction = "place the object upright on the table";
  }
  return r;
}

std::vector<GraspCandidate> make_grasps(const Recipe& recipe, const RigidPose& world_to_camera,
                                        const CameraIntrinsics& k, std::size_t count, Rng& rng) {
  std::vector<GraspCandidate> out;
  const PointCloud on_object =
      transform_cloud(sample_mesh_surface(recipe.objects[0].mesh, count, rng.next()), world_to_camera * recipe.objects[0].pose);
  const PointCloud on_target = transform_cloud(sample_mesh_surface(recipe.objects[recipe.target].mesh, count, rng.next()),
                                               world_to_camera * recipe.objects[recipe.target].pose);
  for (std::size_t i = 0; i < count; ++i) {
    GraspCandidate g;
    const double kind = rng.uniform();
    if (kind < 0.3) {
      g.grasp_point = on_object.points[i] + 0.003 * rng.uniform() * rng.unit_vector();
    } else if (kind < 0.6) {
      g.grasp_point = on_target.points[i];
    } else {
      // Anywhere in the view frustum.
      const double z = rng.uniform(0.3, 0.9);
      g.grasp_point = Vec3((rng.uniform(0.0, k.width) - k.cx) * z / k.fx, (rng.uniform(0.0, k.height) - k.cy) * z / k.fy, z);
    }
    g.pose = RigidPose(rng.rotation(), g.grasp_point);
    g.width = rng.uniform(0.02, 0.1);
    g.confidence = rng.uniform();
    out.push_back(g);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& synthetic_tasks() {
  static const std::vector<std::string> tasks = {"cube-into-box", "cube-onto-cube", "cup-upside-down-on-box"};
  return tasks;
}

RigidPose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) throw InvalidInput("look_at: view direction is vertical");
  right.normalize();
  Mat3 r;
  r.col(0) = right;
  r.col(1) = forward.cross(right);
  r.col(2) = forward;
  return RigidPose(r, eye);
}

SceneSpec generate_synthetic_scene(const fs::path& out_dir, const SceneGenOptions& options) {
  if (options.width <= 0 || options.height <= 0 || !(options.focal > 0.0) || !(options.camera_distance > 0.0)) {
    throw InvalidInput("generate_synthetic_scene: bad camera options");
  }
  Rng rng(options.seed * 0x9E3779B97F4A7C15ULL + 17);
  Recipe recipe = make_recipe(options.recipe, rng);

  SceneSpec scene;
  scene.base_dir = out_dir;
  scene.seed = options.seed;
  scene.intrinsics = CameraIntrinsics{options.focal, options.focal, 0.5 * options.width, 0.5 * options.height,
                                      options.width, options.height};
  Aabb bounds;
  for (const auto& o : recipe.objects) {
    for (const auto& v : o.mesh.vertices) bounds.expand(o.pose * v);
  }
  const double azimuth = rng.uniform(0.0, 2.0 * M_PI), pitch = rng.uniform(55.0, 65.0) * kDegToRad;
  const Vec3 look = bounds.center();
  const Vec3 eye = look + options.camera_distance * Vec3(std::cos(azimuth) * std::cos(pitch),
                                                         std::sin(azimuth) * std::cos(pitch), std::sin(pitch));
  scene.camera_pose = look_at(eye, look);

  // The floor is rendered for context but is not an object.
  const TriangleMesh floor = make_box(Vec3(1.5, 1.5, 0.01));
  const RigidPose floor_pose = RigidPose::from_translation(Vec3(0.0, 0.0, -0.01));
  std::vector<PosedMesh> posed;
  for (const auto& o : recipe.objects) posed.push_back({&o.mesh, o.pose});
  posed.push_back({&floor, floor_pose});
  const LabeledView view = render_scene_labeled(posed, scene.camera_pose, scene.intrinsics);

  fs::create_directories(out_dir);
  scene.rgb = "rgb.ppm";
  scene.depth = "depth.tfd";
  scene.region_mask = "region_mask.pgm";
  scene.grasps = "grasps.txt";
  io::write_ppm(out_dir / scene.rgb, view.view.rgb);
  io::write_depth_raw(out_dir / scene.depth, view.view.depth);

  const int w = options.width, h = options.height;
  for (std::size_t i = 0; i < recipe.objects.size(); ++i) {
    const ObjectSpec& spec = recipe.objects[i].spec;
    if (spec.mask.empty()) continue;
    BinaryMask mask(w, h);
    for (std::size_t p = 0; p < mask.size(); ++p) mask.values[p] = view.object_id.values[p] == static_cast<int>(i);
    io::write_mask(out_dir / spec.mask, mask);
  }
  // Upward-facing surfaces of the target.
  BinaryMask region(w, h);
  const Placement& target = recipe.objects[recipe.target];
  for (std::size_t p = 0; p < region.size(); ++p) {
    if (view.object_id.values[p] != static_cast<int>(recipe.target)) continue;
    const auto t = static_cast<std::size_t>(view.triangle_id.values[p]);
    region.values[p] = (target.pose.rotation * target.mesh.triangle_normal(t)).z() > 0.9;
  }
  io::write_mask(out_dir / scene.region_mask, region);

  write_grasp_candidates(out_dir / scene.grasps, make_grasps(recipe, scene.camera_pose.inverse(), scene.intrinsics,
                                                             options.grasp_candidates, rng));

  scene.instruction = recipe.instruction;
  scene.goal = recipe.goal;
  for (auto& o : recipe.objects) scene.objects.push_back(o.spec);
  save_scene(out_dir / "scene.json", scene);
  scene.validate();
  return scene;
}

}  // namespace twinforge
