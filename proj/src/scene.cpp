#include "twinforge/scene.hpp"

#include <fstream>
#include <set>

#include "twinforge/io.hpp"
#include "twinforge/primitives.hpp"

namespace twinforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kGeneratePrefix = "generate:";

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string get_string(const json& j, const char* key) { return get_or<std::string>(j, key, ""); }

}  // namespace

json pose_to_json(const RigidPose& pose) { return json(pose.to_array()); }

RigidPose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) throw InvalidInput("pose must be [w, x, y, z, tx, ty, tz]");
  std::array<double, 7> a{};
  for (std::size_t i = 0; i < 7; ++i) a[i] = j[i].get<double>();
  const double norm = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]);
  if (std::abs(norm - 1.0) > 1e-6) throw InvalidInput("pose quaternion is not unit");
  return RigidPose::from_array(a);
}

json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.validate();
  return k;
}

json goal_to_json(const Goal& goal) {
  json all = json::array();
  for (const auto& p : goal.all_of) all.push_back({{"predicate", p.name}, {"args", p.args}});
  return {{"all_of", all}};
}

Goal goal_from_json(const json& j) {
  Goal g;
  auto one = [](const json& p) {
    PlacementPredicate pred{p.at("predicate").get<std::string>(), p.at("args").get<std::vector<std::string>>()};
    pred.validate();
    return pred;
  };
  if (j.contains("all_of")) {
    for (const auto& p : j.at("all_of")) g.all_of.push_back(one(p));
  } else {
    g.all_of.push_back(one(j));
  }
  if (g.all_of.empty()) throw InvalidInput("goal has no predicates");
  return g;
}

void SceneSpec::validate() const {
  intrinsics.validate();
  std::set<std::string> names;
  std::size_t manipulated = 0;
  for (const auto& o : objects) {
    if (o.name.empty()) throw InvalidInput("object without a name");
    if (!names.insert(o.name).second) throw InvalidInput("duplicate object name: " + o.name);
    if (o.mesh.empty()) throw InvalidInput("object " + o.name + " has no mesh");
    if (o.role == ObjectRole::manipulated) ++manipulated;
    if (o.role != ObjectRole::fixed && o.mask.empty()) throw InvalidInput("object " + o.name + " has no mask");
    if (o.role == ObjectRole::fixed && !o.pose) throw InvalidInput("static object " + o.name + " has no pose");
  }
  if (manipulated != 1) throw InvalidInput("scene needs exactly one manipulated object");
  if (goal.all_of.empty()) throw InvalidInput("scene has no goal");
  for (const auto& p : goal.all_of) {
    p.validate();
    for (const auto& a : p.args) {
      if (!names.count(a)) throw InvalidInput("goal names unknown object " + a);
    }
  }
  if (rgb.empty() || depth.empty()) throw InvalidInput("scene needs rgb and depth images");
  if (region_mask.empty()) throw InvalidInput("scene needs a region mask");
}

fs::path SceneSpec::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

std::size_t SceneSpec::manipulated_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].role == ObjectRole::manipulated) return i;
  }
  throw InvalidInput("scene has no manipulated object");
}

json scene_to_json(const SceneSpec& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json jo = {{"name", o.name}, {"role", role_name(o.role)}, {"mesh", o.mesh}, {"material", o.material}};
    if (!o.mask.empty()) jo["mask"] = o.mask;
    if (o.pose) jo["pose"] = pose_to_json(*o.pose);
    if (o.ground_truth_pose) jo["ground_truth_pose"] = pose_to_json(*o.ground_truth_pose);
    objects.push_back(jo);
  }
  json j = {{"schema_version", kSceneSchemaVersion},
            {"camera", {{"intrinsics", intrinsics_to_json(scene.intrinsics)}, {"pose", pose_to_json(scene.camera_pose)}}},
            {"images", {{"rgb", scene.rgb}, {"depth", scene.depth}, {"depth_scale", scene.depth_scale}}},
            {"region_mask", scene.region_mask},
            {"instruction", scene.instruction},
            {"goal", goal_to_json(scene.goal)},
            {"objects", objects},
            {"seed", scene.seed},
            {"config", scene.config}};
  if (!scene.grasps.empty()) j["grasps"] = scene.grasps;
  return j;
}

SceneSpec scene_from_json(const json& j, const fs::path& base_dir) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSceneSchemaVersion) {
      throw InvalidInput("unsupported scene schema_version " + std::to_string(version));
    }
    SceneSpec s;
    s.base_dir = base_dir;
    s.intrinsics = intrinsics_from_json(j.at("camera").at("intrinsics"));
    s.camera_pose = pose_from_json(j.at("camera").at("pose"));
    const json& images = j.at("images");
    s.rgb = images.at("rgb").get<std::string>();
    s.depth = images.at("depth").get<std::string>();
    s.depth_scale = get_or(images, "depth_scale", 0.001);
    s.region_mask = get_string(j, "region_mask");
    s.grasps = get_string(j, "grasps");
    s.instruction = get_string(j, "instruction");
    s.goal = goal_from_json(j.at("goal"));
    for (const auto& jo : j.at("objects")) {
      ObjectSpec o;
      o.name = jo.at("name").get<std::string>();
      o.role = parse_role(jo.at("role").get<std::string>());
      o.mesh = jo.at("mesh").get<std::string>();
      o.material = get_or<std::string>(jo, "material", "default");
      o.mask = get_string(jo, "mask");
      if (jo.contains("pose")) o.pose = pose_from_json(jo.at("pose"));
      if (jo.contains("ground_truth_pose")) o.ground_truth_pose = pose_from_json(jo.at("ground_truth_pose"));
      s.objects.push_back(std::move(o));
    }
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("config")) s.config = j.at("config");
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("scene: ") + e.what());
  }
}

SceneSpec load_scene(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scene " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  SceneSpec s = scene_from_json(j, path.parent_path());
  std::vector<std::string> files = {s.rgb, s.depth, s.region_mask};
  if (!s.grasps.empty()) files.push_back(s.grasps);
  for (const auto& o : s.objects) {
    if (!o.mask.empty()) files.push_back(o.mask);
    if (o.mesh.rfind(kGeneratePrefix, 0) != 0) files.push_back(o.mesh);
  }
  for (const auto& f : files) {
    if (!fs::exists(s.resolve(f))) throw InvalidInput("scene references missing file " + f);
  }
  return s;
}

void save_scene(const fs::path& path, const SceneSpec& scene) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << scene_to_json(scene).dump(2) << "\n";
}

TriangleMesh load_object_mesh(const SceneSpec& scene, const ObjectSpec& object) {
  if (object.mesh.rfind(kGeneratePrefix, 0) == 0) {
    return make_primitive(object.mesh.substr(std::string(kGeneratePrefix).size()));
  }
  return io::read_mesh(scene.resolve(object.mesh));
}

SceneTwin ground_truth_twin(const SceneSpec& scene, const MaterialTable& materials) {
  SceneTwin twin;
  for (const auto& o : scene.objects) {
    const std::optional<RigidPose>& pose = o.ground_truth_pose ? o.ground_truth_pose : o.pose;
    if (!pose) throw InvalidInput("object " + o.name + " has no ground-truth pose");
    twin.objects.push_back({o.name, load_object_mesh(scene, o), *pose, materials.lookup(o.material).props, o.role});
  }
  twin.validate();
  return twin;
}

}  // namespace twinforge
