#include "twinforge/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <set>

#include "twinforge/io.hpp"

namespace twinforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Reads known keys of one config section and rejects the rest.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) node_ = root.at(name);
    if (!node_.is_object()) throw InvalidInput("config section " + name + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : node_.items()) {
      if (!used_.count(k)) throw InvalidInput("unknown config key " + name_ + "." + k);
    }
  }
  template <typename T>
  void read(const std::string& key, T& field) {
    used_.insert(key);
    if (!node_.contains(key)) return;
    try {
      field = node_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput("config " + name_ + "." + key + ": " + e.what());
    }
  }
  void read_vec3(const std::string& key, Vec3& v) {
    std::array<double, 3> a{v.x(), v.y(), v.z()};
    read(key, a);
    v = Vec3(a[0], a[1], a[2]);
  }

 private:
  std::string name_;
  json node_ = json::object();
  std::set<std::string> used_;
};

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

/// Runs stages in order; the first failure stops the run.
class StageRunner {
 public:
  explicit StageRunner(RunReport& report) : report_(report) {}

  using Body = std::function<std::optional<std::string>(StageRecord&)>;

  /// Input errors propagate from stages that load files; elsewhere every
  /// exception becomes a stage failure.
  bool run(const std::string& name, const Body& body, bool loads_input = false) {
    if (failed_) return false;
    StageRecord rec;
    rec.stage = name;
    const auto start = std::chrono::steady_clock::now();
    std::optional<std::string> failure;
    try {
      failure = body(rec);
    } catch (const InvalidInput&) {
      if (loads_input) throw;
      failure = "invalid-input";
    } catch (const IoError&) {
      if (loads_input) throw;
      failure = "io-error";
    } catch (const std::exception& e) {
      failure = e.what();
    }
    rec.time_ms = elapsed_ms(start);
    if (failure) {
      rec.success = false;
      rec.reason = *failure;
      failed_ = true;
    }
    report_.stages.push_back(std::move(rec));
    return !failed_;
  }

 private:
  RunReport& report_;
  bool failed_ = false;
};

MaterialTable material_table(const PipelineConfig& config) {
  MaterialTable table = MaterialTable::builtin();
  if (!config.materials.empty()) {
    for (const auto& [name, row] : MaterialTable::load(config.materials).rows()) table.set(row);
  }
  return table;
}

/// Inputs of the perception stages.
struct Loaded {
  ColorImage rgb;
  DepthImage depth;
  std::vector<BinaryMask> masks;  // per object; empty for static ones
  std::vector<TriangleMesh> meshes;
  BinaryMask region;
};

DepthImage load_depth(const SceneSpec& scene) { return io::read_depth(scene.resolve(scene.depth), scene.depth_scale); }

std::size_t masked_depth_pixels(const BinaryMask& mask, const DepthImage& depth) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) n += mask.values[i] && valid_depth(depth.values[i]);
  return n;
}

bool segmentation_load(const SceneSpec& scene, const PipelineConfig& config, StageRunner& runner, Loaded& in) {
  return runner.run(
      "segmentation-load",
      [&](StageRecord& rec) -> std::optional<std::string> {
        const int w = scene.intrinsics.width, h = scene.intrinsics.height;
        in.rgb = io::read_ppm(scene.resolve(scene.rgb));
        in.depth = load_depth(scene);
        in.region = io::read_mask(scene.resolve(scene.region_mask));
        if (!in.rgb.same_shape(w, h) || !in.depth.same_shape(w, h) || !in.region.same_shape(w, h)) {
          throw InvalidInput("scene images differ from the intrinsics size");
        }
        json counts = json::object();
        std::optional<std::string> failure;
        for (const auto& o : scene.objects) {
          in.meshes.push_back(load_object_mesh(scene, o));
          BinaryMask m;
          if (!o.mask.empty()) {
            m = io::read_mask(scene.resolve(o.mask));
            if (!m.same_shape(w, h)) throw InvalidInput("mask of " + o.name + " has the wrong size");
            const std::size_t n = masked_depth_pixels(m, in.depth);
            counts[o.name] = n;
            if (n < config.alignment.min_mask_pixels && !failure) failure = "segmentation-too-small:" + o.name;
          }
          in.masks.push_back(std::move(m));
        }
        rec.details["mask_pixels"] = counts;
        return failure;
      },
      true);
}

/// Coarse and fine alignment of every non-static object; fills the twin.
bool align_objects(const SceneSpec& scene, const PipelineConfig& config, const MaterialTable& materials,
                   StageRunner& runner, const Loaded& in, RunReport& report) {
  std::vector<AlignmentResult> results(scene.objects.size());
  auto observation = [&](std::size_t i) {
    return Observation{in.rgb, in.depth, in.masks[i], scene.intrinsics};
  };
  auto config_for = [&](std::size_t i) {
    AlignmentConfig c = config.alignment;
    c.seed = scene.seed * 1000003ULL + i;
    return c;
  };
  const bool coarse_ok = runner.run("coarse-align", [&](StageRecord& rec) -> std::optional<std::string> {
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      if (scene.objects[i].role == ObjectRole::fixed) continue;
      results[i] = coarse_align_stage(in.meshes[i], observation(i), config_for(i));
      rec.details[scene.objects[i].name] = {{"similarity", results[i].coarse_similarity},
                                            {"hypothesis", results[i].coarse.best_index}};
      if (!results[i].ok()) return results[i].failure->reason + ":" + scene.objects[i].name;
    }
    return std::nullopt;
  });
  if (!coarse_ok) return false;
  return runner.run("fine-register", [&](StageRecord& rec) -> std::optional<std::string> {
    SceneTwin twin;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const ObjectSpec& o = scene.objects[i];
      const MaterialLookup mat = materials.lookup(o.material);
      json jo = {{"name", o.name}, {"role", role_name(o.role)}, {"material", mat.props.name},
                 {"material_warning", mat.warning}};
      RigidPose world;
      TriangleMesh mesh;
      if (o.role == ObjectRole::fixed) {
        world = *o.pose;
        mesh = in.meshes[i];
      } else {
        AlignmentResult& r = results[i];
        fine_register_stage(in.meshes[i], observation(i), config_for(i), r);
        rec.details[o.name] = {{"inlier_fraction", r.ransac.inlier_fraction}, {"rmse", r.registration.rmse}};
        if (!r.ok()) return r.failure->reason + ":" + o.name;
        world = scene.camera_pose * r.pose;
        mesh = r.scaled_mesh;
        jo["scale"] = vec3_json(r.scale.per_axis);
        jo["coarse_similarity"] = r.coarse_similarity;
        jo["rmse"] = r.registration.rmse;
        if (o.ground_truth_pose) {
          jo["rotation_error_deg"] = rotation_angle_between(world.rotation, o.ground_truth_pose->rotation) * 180.0 / M_PI;
          jo["translation_error"] = (world.translation - o.ground_truth_pose->translation).norm();
        }
      }
      jo["pose"] = pose_to_json(world);
      report.objects.push_back(jo);
      twin.objects.push_back({o.name, std::move(mesh), world, mat.props, o.role});
    }
    twin.validate();
    report.twin = std::move(twin);
    return std::nullopt;
  });
}

json sample_json(const StrategySample& s) {
  json j = {{"id", s.sample_id}, {"pose", pose_to_json(s.object_pose)}};
  j["label"] = s.weak_label ? json(*s.weak_label) : json(nullptr);
  j["probability"] = s.success_prob ? json(*s.success_prob) : json(nullptr);
  if (!s.failure_reason.empty()) j["reason"] = s.failure_reason;
  if (s.outcome) {
    j["stable"] = s.outcome->stable;
    j["penetration"] = s.outcome->penetration;
    j["topple_steps"] = s.outcome->topple_steps;
  }
  return j;
}

}  // namespace

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
  if (!j.is_object()) throw InvalidInput("config must be a JSON object");
  static const std::set<std::string> sections = {"alignment", "grasp", "sampling", "simulation", "gp"};
  for (const auto& [k, v] : j.items()) {
    if (!sections.count(k)) throw InvalidInput("unknown config section " + k);
  }
  {
    Section s(j, "alignment");
    AlignmentConfig& a = c.alignment;
    s.read("rotation_count", a.rotation_count);
    s.read("refine_starts", a.coarse_refine.starts);
    s.read("object_pixels", a.coarse.object_pixels);
    s.read("coarse_centering_steps", a.coarse_centering_steps);
    s.read("estimate_scale", a.estimate_scale);
    s.read("scale_passes", a.scale_passes);
    s.read("depth_scale_from_image_axes", a.depth_scale_from_image_axes);
    s.read("feature_voxel", a.feature_voxel);
    s.read("icp_voxel", a.icp_voxel);
    s.read("normal_k", a.normal_k);
    s.read("fpfh_radius_factor", a.fpfh_radius_factor);
    s.read("ransac_trials", a.ransac.max_trials);
    s.read("ransac_inlier_threshold", a.ransac.inlier_threshold);
    s.read("icp_max_iterations", a.icp.max_iterations);
    s.read("icp_max_distance", a.icp.max_correspondence_distance);
    s.read("min_mask_pixels", a.min_mask_pixels);
  }
  {
    Section s(j, "grasp");
    s.read("top_k", c.grasp.top_k);
    s.read("proximity", c.grasp.proximity);
    s.read("max_attempts", c.grasp.max_attempts);
    s.read("max_gripper_width", c.max_gripper_width);
  }
  {
    Section s(j, "sampling");
    s.read("n_rotations", c.sampling.n_rotations);
    s.read("n_offsets", c.sampling.n_offsets);
    s.read("offset_radius", c.sampling.offset_radius);
    s.read("clearance", c.sampling.clearance);
    s.read("max_tilt_deg", c.max_tilt_deg);
    s.read_vec3("workspace_min", c.workspace.min);
    s.read_vec3("workspace_max", c.workspace.max);
  }
  {
    Section s(j, "simulation");
    s.read("contact_tolerance", c.simulation.contact_tolerance);
    s.read("penetration_tolerance", c.simulation.penetration_tolerance);
    s.read("topple_step_deg", c.simulation.topple_step_deg);
    s.read("max_topple_steps", c.simulation.max_topple_steps);
    s.read("surface_samples", c.simulation.surface_samples);
    s.read("checker_standoff", c.simulation.checker_standoff);
    s.read("materials", c.materials);
  }
  {
    Section s(j, "gp");
    s.read("signal_variance", c.gp.signal_variance);
    s.read("translation_length", c.gp.translation_length);
    s.read("rotation_length", c.gp.rotation_length);
    s.read("jitter", c.gp.jitter);
    s.read("grid_search", c.gp_fit.grid_search);
  }
  c.gp.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  const AlignmentConfig& a = c.alignment;
  return {{"alignment",
           {{"rotation_count", a.rotation_count},
            {"refine_starts", a.coarse_refine.starts},
            {"object_pixels", a.coarse.object_pixels},
            {"coarse_centering_steps", a.coarse_centering_steps},
            {"estimate_scale", a.estimate_scale},
            {"scale_passes", a.scale_passes},
            {"depth_scale_from_image_axes", a.depth_scale_from_image_axes},
            {"feature_voxel", a.feature_voxel},
            {"icp_voxel", a.icp_voxel},
            {"normal_k", a.normal_k},
            {"fpfh_radius_factor", a.fpfh_radius_factor},
            {"ransac_trials", a.ransac.max_trials},
            {"ransac_inlier_threshold", a.ransac.inlier_threshold},
            {"icp_max_iterations", a.icp.max_iterations},
            {"icp_max_distance", a.icp.max_correspondence_distance},
            {"min_mask_pixels", a.min_mask_pixels}}},
          {"grasp",
           {{"top_k", c.grasp.top_k},
            {"proximity", c.grasp.proximity},
            {"max_attempts", c.grasp.max_attempts},
            {"max_gripper_width", c.max_gripper_width}}},
          {"sampling",
           {{"n_rotations", c.sampling.n_rotations},
            {"n_offsets", c.sampling.n_offsets},
            {"offset_radius", c.sampling.offset_radius},
            {"clearance", c.sampling.clearance},
            {"max_tilt_deg", c.max_tilt_deg},
            {"workspace_min", vec3_json(c.workspace.min)},
            {"workspace_max", vec3_json(c.workspace.max)}}},
          {"simulation",
           {{"contact_tolerance", c.simulation.contact_tolerance},
            {"penetration_tolerance", c.simulation.penetration_tolerance},
            {"topple_step_deg", c.simulation.topple_step_deg},
            {"max_topple_steps", c.simulation.max_topple_steps},
            {"surface_samples", c.simulation.surface_samples},
            {"checker_standoff", c.simulation.checker_standoff},
            {"materials", c.materials}}},
          {"gp",
           {{"signal_variance", c.gp.signal_variance},
            {"translation_length", c.gp.translation_length},
            {"rotation_length", c.gp.rotation_length},
            {"jitter", c.gp.jitter},
            {"grid_search", c.gp_fit.grid_search}}}};
}

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"segmentation-load", "grasp",      "coarse-align", "fine-register",
                                                  "region",            "sampling",   "simulation",   "result-check",
                                                  "gp-rank",           "select"};
  return stages;
}

bool RunReport::ok() const {
  return failed_stage() == nullptr;
}

const StageRecord* RunReport::failed_stage() const {
  for (const auto& s : stages) {
    if (!s.success) return &s;
  }
  return nullptr;
}

RunReport run_pipeline(const SceneSpec& scene, const PipelineConfig& config, const RunOptions& options) {
  scene.validate();
  RunReport report;
  report.config = config_to_json(config);
  StageRunner runner(report);
  const MaterialTable materials = material_table(config);
  const std::size_t m = scene.manipulated_index();
  Loaded in;
  if (!segmentation_load(scene, config, runner, in)) return report;

  runner.run("grasp", [&](StageRecord& rec) -> std::optional<std::string> {
    if (scene.grasps.empty()) {
      rec.details["skipped"] = true;
      return std::nullopt;
    }
    FileGraspProvider provider(scene.resolve(scene.grasps));
    const PointCloud object_cloud = backproject(in.depth, scene.intrinsics, &in.masks[m]);
    const double max_width = config.max_gripper_width;
    const GraspSearch search = grasp_with_retry(
        provider, object_cloud, [&](const GraspCandidate& g) { return g.width <= max_width; }, config.grasp);
    json attempts = json::array();
    for (const auto& a : search.attempts) {
      attempts.push_back({{"rank", a.candidate_index}, {"confidence", a.confidence}, {"accepted", a.accepted}});
    }
    rec.details["attempts"] = attempts;
    if (!search.found) return search.failure;
    rec.details["grasp"] = {{"pose", pose_to_json(search.grasp.pose)},
                            {"grasp_point", vec3_json(search.grasp.grasp_point)},
                            {"width", search.grasp.width},
                            {"confidence", search.grasp.confidence}};
    return std::nullopt;
  });

  if (!align_objects(scene, config, materials, runner, in, report)) return report;
  const SceneTwin& twin = *report.twin;

  InteractionRegion region;
  runner.run("region", [&](StageRecord& rec) -> std::optional<std::string> {
    if (masked_depth_pixels(in.region, in.depth) == 0) return "empty-region";
    region = interaction_region(in.region, in.depth, scene.intrinsics, scene.camera_pose);
    rec.details = {{"centroid", vec3_json(region.centroid)}, {"points", region.cloud.size()}};
    return std::nullopt;
  });

  runner.run("sampling", [&](StageRecord& rec) -> std::optional<std::string> {
    const Aabb workspace = config.workspace;
    const double tilt = config.max_tilt_deg;
    const auto rest = config.sampling.rest_orientations;
    report.samples = sample_strategies(region, twin.objects[m].mesh, config.sampling,
                                       [&](const RigidPose& p) { return builtin_reachability(p, workspace, tilt, rest); },
                                       scene.seed);
    rec.details["samples"] = report.samples.size();
    if (report.samples.empty()) return "all-unreachable";
    return std::nullopt;
  });

  SettleOptions batch = config.simulation;
  batch.render = false;
  const SettleSimulator simulator(batch);
  const GeometricEvaluator evaluator(scene.goal);
  runner.run("simulation", [&](StageRecord& rec) -> std::optional<std::string> {
    label_samples(twin, report.samples, simulator, evaluator, scene.instruction);
    std::map<std::string, int> reasons;
    std::size_t errors = 0;
    for (const auto& s : report.samples) {
      if (!s.failure_reason.empty()) ++reasons[s.failure_reason.substr(0, s.failure_reason.find(':'))];
      if (!s.outcome) ++errors;
    }
    rec.details["failure_reasons"] = reasons;
    if (errors == report.samples.size()) return report.samples.front().failure_reason;
    return std::nullopt;
  });

  runner.run("result-check", [&](StageRecord& rec) -> std::optional<std::string> {
    std::size_t positives = 0;
    for (const auto& s : report.samples) positives += s.weak_label.value_or(false);
    rec.details = {{"positives", positives}, {"negatives", report.samples.size() - positives}};
    if (positives == 0) return "no-successful-outcome";
    return std::nullopt;
  });

  Ranking ranking;
  runner.run("gp-rank", [&](StageRecord& rec) -> std::optional<std::string> {
    const GpModel model = gp_fit(report.samples, config.gp, config.gp_fit);
    ranking = rank_and_select(model, report.samples);
    for (const auto& s : ranking.ranked) report.samples[static_cast<std::size_t>(s.sample_id)].success_prob = s.success_prob;
    for (const auto& s : ranking.priority) report.priority_ids.push_back(s.sample_id);
    rec.details = {{"iterations", model.iterations},
                   {"degenerate", model.degenerate},
                   {"log_marginal", model.log_marginal},
                   {"signal_variance", model.params.signal_variance},
                   {"translation_length", model.params.translation_length},
                   {"rotation_length", model.params.rotation_length}};
    if (options.out_dir) {
      fs::create_directories(*options.out_dir);
      write_gp_model(*options.out_dir / "gp_model.txt", model);
      rec.artifacts.push_back("gp_model.txt");
    }
    return std::nullopt;
  });

  runner.run("select", [&](StageRecord& rec) -> std::optional<std::string> {
    report.selected = ranking.best();
    rec.details = {{"sample_id", report.selected->sample_id}, {"probability", *report.selected->success_prob}};
    if (options.out_dir) {
      SettleOptions rendered = config.simulation;
      rendered.render = true;
      const SimOutcome out = settle_simulate(twin, *report.selected, rendered);
      io::write_ppm(*options.out_dir / "selected_checker.ppm", out.rendered.rgb);
      rec.artifacts.push_back("selected_checker.ppm");
    }
    return std::nullopt;
  });

  if (report.ok() && options.verify_ground_truth) {
    const bool has_truth = std::all_of(scene.objects.begin(), scene.objects.end(), [](const ObjectSpec& o) {
      return o.ground_truth_pose.has_value() || o.pose.has_value();
    });
    if (has_truth) {
      const SceneTwin truth = ground_truth_twin(scene, materials);
      StrategySample s = *report.selected;
      const SimOutcome out = settle_simulate(truth, s, batch);
      report.ground_truth_goal = !out.penetration && evaluator.evaluate(truth, out, scene.instruction);
    }
  }
  return report;
}

RunReport run_alignment(const SceneSpec& scene, const PipelineConfig& config) {
  scene.validate();
  RunReport report;
  report.config = config_to_json(config);
  StageRunner runner(report);
  Loaded in;
  if (!segmentation_load(scene, config, runner, in)) return report;
  align_objects(scene, config, material_table(config), runner, in, report);
  return report;
}

json report_to_json(const RunReport& report, bool include_timing) {
  json stages = json::array();
  for (const auto& s : report.stages) {
    json js = {{"stage", s.stage}, {"success", s.success}, {"artifacts", s.artifacts}, {"details", s.details}};
    if (!s.success) js["reason"] = s.reason;
    if (include_timing) js["time_ms"] = s.time_ms;
    stages.push_back(js);
  }
  json samples = json::array();
  for (const auto& s : report.samples) samples.push_back(sample_json(s));
  json j = {{"schema_version", kReportSchemaVersion},
            {"versions", {{"twinforge", kTwinforgeVersion}, {"scene_schema", kSceneSchemaVersion}}},
            {"status", report.ok() ? "success" : "stage-failure"},
            {"stages", stages},
            {"objects", report.objects},
            {"samples", samples},
            {"priority_ids", report.priority_ids},
            {"config", report.config}};
  if (const StageRecord* f = report.failed_stage()) j["failure"] = {{"stage", f->stage}, {"reason", f->reason}};
  j["selected"] = report.selected ? sample_json(*report.selected) : json(nullptr);
  j["ground_truth_check"] =
      report.ground_truth_goal ? json{{"goal_satisfied", *report.ground_truth_goal}} : json(nullptr);
  return j;
}

void write_report(const fs::path& path, const RunReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_to_json(report).dump(2) << "\n";
}

SingleSimulation simulate_single(const SceneSpec& scene, const PipelineConfig& config, const RigidPose& pose) {
  const SceneTwin truth = ground_truth_twin(scene, material_table(config));
  SingleSimulation out;
  out.sample.object_pose = pose;
  out.sample.outcome = settle_simulate(truth, out.sample, config.simulation);
  const GeometricEvaluator evaluator(scene.goal);
  out.goal_satisfied = !out.sample.outcome->penetration && evaluator.evaluate(truth, *out.sample.outcome, scene.instruction);
  out.sample.weak_label = out.goal_satisfied;
  return out;
}

}  // namespace twinforge
