// twinforge command-line interface.
//
//   twinforge gen-scene --task cube-into-box --seed 3 --out scenes/s3
//   twinforge plan --scene scenes/s3/scene.json --out runs/s3
//   twinforge align --scene scenes/s3/scene.json --out runs/s3
//   twinforge simulate --scene scenes/s3/scene.json --pose 1,0,0,0,0.02,0,0.1 --out runs/s3
//   twinforge bench-align --trials 40 --out bench
//
// Exit codes: 0 success, 2 stage failure (report still written), 3 invalid input.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "twinforge/benchmark.hpp"
#include "twinforge/io.hpp"
#include "twinforge/parallel.hpp"
#include "twinforge/pipeline.hpp"
#include "twinforge/scene_gen.hpp"

namespace fs = std::filesystem;
using namespace twinforge;
using nlohmann::json;

namespace {

constexpr int kExitStageFailure = 2;
constexpr int kExitInvalidInput = 3;

struct Common {
  std::string scene;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string config;
};

void add_common(CLI::App* cmd, Common& c, bool needs_scene) {
  auto* scene = cmd->add_option("--scene", c.scene, "scene JSON file");
  if (needs_scene) scene->required();
  cmd->add_option("--seed", c.seed, "seed override");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--config", c.config, "pipeline config JSON");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Defaults, then the scene's overrides, then the --config file. A
/// relative materials path is relative to the file that names it.
PipelineConfig resolve_config(const SceneSpec* scene, const Common& c) {
  PipelineConfig config;
  auto apply = [&](const json& j, const fs::path& dir) {
    const std::string before = config.materials;
    config = config_from_json(j, config);
    if (config.materials != before && fs::path(config.materials).is_relative()) {
      config.materials = (dir / config.materials).string();
    }
  };
  if (scene) apply(scene->config, scene->base_dir);
  if (!c.config.empty()) apply(read_json(c.config), fs::path(c.config).parent_path());
  return config;
}

SceneSpec load(const Common& c) {
  SceneSpec scene = load_scene(c.scene);
  if (c.seed) scene.seed = *c.seed;
  return scene;
}

RigidPose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InvalidInput("--pose: not a number: " + item);
    }
  }
  if (v.size() != 7) throw InvalidInput("--pose takes w,x,y,z,tx,ty,tz");
  return pose_from_json(json(v));
}

int cmd_plan(const Common& c, bool timing) {
  const SceneSpec scene = load(c);
  const PipelineConfig config = resolve_config(&scene, c);
  RunOptions options;
  options.out_dir = fs::path(c.out);
  const RunReport report = run_pipeline(scene, config, options);
  write_json(fs::path(c.out) / "report.json", report_to_json(report, timing));
  if (const StageRecord* f = report.failed_stage()) {
    std::cout << "stage-failure " << f->stage << ": " << f->reason << "\n";
    return kExitStageFailure;
  }
  std::cout << "selected sample " << report.selected->sample_id << " p=" << *report.selected->success_prob;
  if (report.ground_truth_goal) std::cout << " ground-truth goal " << (*report.ground_truth_goal ? "met" : "missed");
  std::cout << "\n";
  return 0;
}

int cmd_align(const Common& c) {
  const SceneSpec scene = load(c);
  const PipelineConfig config = resolve_config(&scene, c);
  const RunReport report = run_alignment(scene, config);
  write_json(fs::path(c.out) / "alignment.json", report_to_json(report, true));
  if (const StageRecord* f = report.failed_stage()) {
    std::cout << "stage-failure " << f->stage << ": " << f->reason << "\n";
    return kExitStageFailure;
  }
  for (const auto& o : report.objects) std::cout << o.at("name").get<std::string>() << " " << o.at("pose").dump() << "\n";
  return 0;
}

int cmd_simulate(const Common& c, const std::string& pose_text) {
  const SceneSpec scene = load(c);
  const PipelineConfig config = resolve_config(&scene, c);
  const RigidPose pose = parse_pose(pose_text);
  SingleSimulation sim;
  try {
    sim = simulate_single(scene, config, pose);
  } catch (const SimulationError& e) {
    write_json(fs::path(c.out) / "simulation.json",
               {{"schema_version", kReportSchemaVersion}, {"status", "stage-failure"}, {"reason", e.what()}});
    std::cout << "stage-failure simulation: " << e.what() << "\n";
    return kExitStageFailure;
  }
  const SimOutcome& out = *sim.sample.outcome;
  json poses = json::array();
  for (const auto& p : out.settled_poses) poses.push_back(pose_to_json(p));
  write_json(fs::path(c.out) / "simulation.json", {{"schema_version", kReportSchemaVersion},
                                                   {"status", "success"},
                                                   {"pose", pose_to_json(pose)},
                                                   {"settled_poses", poses},
                                                   {"stable", out.stable},
                                                   {"penetration", out.penetration},
                                                   {"topple_steps", out.topple_steps},
                                                   {"goal_satisfied", sim.goal_satisfied}});
  if (!out.rendered.rgb.values.empty()) io::write_ppm(fs::path(c.out) / "checker.ppm", out.rendered.rgb);
  std::cout << "goal " << (sim.goal_satisfied ? "met" : "missed") << "\n";
  return 0;
}

int cmd_gen_scene(const Common& c, const std::string& task, const std::string& primitive) {
  if (task.empty() == primitive.empty()) throw InvalidInput("gen-scene takes exactly one of --task, --primitive");
  SceneGenOptions options;
  options.recipe = task.empty() ? primitive : task;
  if (!task.empty() && std::find(synthetic_tasks().begin(), synthetic_tasks().end(), task) == synthetic_tasks().end()) {
    throw InvalidInput("unknown task: " + task);
  }
  options.seed = c.seed.value_or(0);
  generate_synthetic_scene(c.out, options);
  std::cout << (fs::path(c.out) / "scene.json").string() << "\n";
  return 0;
}

int cmd_bench(const Common& c, const std::string& objects, std::size_t trials) {
  BenchmarkConfig config;
  config.seed = c.seed.value_or(0);
  config.trials = trials;
  if (!objects.empty()) {
    config.objects.clear();
    std::stringstream ss(objects);
    std::string item;
    while (std::getline(ss, item, ',')) config.objects.push_back(item);
  }
  if (!c.config.empty()) config.alignment = config_from_json(read_json(c.config)).alignment;
  const BenchmarkReport report = run_alignment_benchmark(config);
  const fs::path csv = fs::path(c.out) / "benchmark.csv";
  fs::create_directories(c.out);
  write_benchmark_csv(csv, report);
  for (const auto& row : report.rows) {
    std::cout << row.object << " " << row.arm << " success " << row.success_rate() << " rmse " << row.mean_rmse << "\n";
  }
  std::cout << "two-stage " << report.aggregate_success("two-stage") << " direct "
            << report.aggregate_success("direct") << " in " << report.seconds << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinforge: digital twin placement planning"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (overrides TWINFORGE_THREADS)");

  Common plan_c, align_c, sim_c, gen_c, bench_c;
  bool no_timing = false;
  auto* plan = app.add_subcommand("plan", "full pipeline");
  add_common(plan, plan_c, true);
  plan->add_flag("--no-timing", no_timing, "omit timing fields from the report");

  auto* align = app.add_subcommand("align", "two-stage alignment only");
  add_common(align, align_c, true);

  std::string pose;
  auto* sim = app.add_subcommand("simulate", "settle one placement in the ground-truth twin");
  add_common(sim, sim_c, true);
  sim->add_option("--pose", pose, "w,x,y,z,tx,ty,tz world pose of the manipulated object")->required();

  std::string task, primitive;
  auto* gen = app.add_subcommand("gen-scene", "write a synthetic scene");
  add_common(gen, gen_c, false);
  gen->add_option("--task", task, "cube-into-box | cube-onto-cube | cup-upside-down-on-box");
  gen->add_option("--primitive", primitive, "box | cylinder | cup | open_box | ramp | <spec>");

  std::string objects;
  std::size_t trials = 40;
  auto* bench = app.add_subcommand("bench-align", "two-stage vs direct alignment benchmark");
  add_common(bench, bench_c, false);
  bench->add_option("--objects", objects, "comma-separated classes");
  bench->add_option("--trials", trials, "trials per class")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalidInput;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    if (plan->parsed()) return cmd_plan(plan_c, !no_timing);
    if (align->parsed()) return cmd_align(align_c);
    if (sim->parsed()) return cmd_simulate(sim_c, pose);
    if (gen->parsed()) return cmd_gen_scene(gen_c, task, primitive);
    if (bench->parsed()) return cmd_bench(bench_c, objects, trials);
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const IoError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
