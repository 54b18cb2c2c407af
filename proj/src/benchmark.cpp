#include "twinforge/benchmark.hpp"

#include <chrono>
#include <fstream>

#include "twinforge/primitives.hpp"
#include "twinforge/random.hpp"

namespace twinforge {

CameraIntrinsics benchmark_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 320.0;
  k.cx = k.cy = 128.0;
  k.width = k.height = 256;
  return k;
}

std::string benchmark_primitive(const std::string& object) {
  if (object.find(':') != std::string::npos) return object;
  if (object == "box") return "box:0.12,0.08,0.05";
  if (object == "cylinder") return "cylinder:0.035,0.12";
  if (object == "cup") return "cup:0.04,0.09,0.005";
  if (object == "open_box") return "open_box:0.14,0.1,0.07,0.006";
  if (object == "ramp") return "ramp:0.12,0.08,0.05";
  throw InvalidInput("unknown benchmark object: " + object);
}

AlignmentTrial make_alignment_trial(const TriangleMesh& mesh, const CameraIntrinsics& intrinsics,
                                    std::uint64_t seed) {
  Rng rng(seed);
  AlignmentTrial trial;
  trial.mesh = mesh;
  const Eigen::Quaterniond q = rng.rotation();
  const Vec3 center(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(0.45, 0.55));
  trial.truth = RigidPose(q, center - (q * compute_aabb(mesh).center()));
  const RenderedView view = render(mesh, trial.truth, intrinsics);
  trial.observation.rgb = view.rgb;
  trial.observation.depth = view.depth;
  trial.observation.mask = coverage_mask(view);
  trial.observation.intrinsics = intrinsics;
  return trial;
}

TrialOutcome score_alignment(const AlignmentResult& result, const AlignmentTrial& trial) {
  TrialOutcome o;
  o.valid = result.ok();
  if (!o.valid) {
    o.failure = result.failure->stage + ":" + result.failure->reason;
    return o;
  }
  o.rmse = result.registration.rmse;
  o.rotation_error_deg = rotation_angle_between(result.pose.rotation, trial.truth.rotation) * 180.0 / M_PI;
  o.translation_error = (result.pose.translation - trial.truth.translation).norm();
  o.success = alignment_success(result.pose, trial.truth, mesh_diameter(trial.mesh));
  return o;
}

double BenchmarkReport::aggregate_success(const std::string& arm) const {
  std::size_t trials = 0, successes = 0;
  for (const auto& r : rows) {
    if (r.arm != arm) continue;
    trials += r.trials;
    successes += r.successes;
  }
  return trials ? static_cast<double>(successes) / trials : 0.0;
}

namespace {

void add_outcome(BenchmarkRow& row, TrialOutcome o) {
  ++row.trials;
  if (o.valid) ++row.valid;
  if (o.success) {
    row.mean_rmse += (o.rmse - row.mean_rmse) / static_cast<double>(++row.successes);
    row.max_rmse = std::max(row.max_rmse, o.rmse);
  }
  row.outcomes.push_back(std::move(o));
}

}  // namespace

BenchmarkReport run_alignment_benchmark(const BenchmarkConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  BenchmarkReport report;
  for (std::size_t obj = 0; obj < config.objects.size(); ++obj) {
    const std::string& name = config.objects[obj];
    const TriangleMesh mesh = make_primitive(benchmark_primitive(name));
    BenchmarkRow two, direct;
    two.object = direct.object = name;
    two.arm = "two-stage";
    direct.arm = "direct";
    for (std::size_t t = 0; t < config.trials; ++t) {
      const std::uint64_t seed = config.seed * 1000003ULL + obj * 10007ULL + t;
      const AlignmentTrial trial = make_alignment_trial(mesh, config.intrinsics, seed);
      add_outcome(two, score_alignment(two_stage_align(mesh, trial.observation, config.alignment), trial));
      add_outcome(direct, score_alignment(direct_align(mesh, trial.observation, config.alignment), trial));
    }
    report.rows.push_back(std::move(two));
    report.rows.push_back(std::move(direct));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_benchmark_csv(const std::filesystem::path& path, const BenchmarkReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "object,arm,trials,valid_samples,success_rate,mean_rmse\n";
  out.precision(6);
  for (const auto& r : report.rows) {
    out << r.object << "," << r.arm << "," << r.trials << "," << r.valid << "," << std::fixed
        << r.success_rate() << "," << r.mean_rmse << std::defaultfloat << "\n";
  }
}

}  // namespace twinforge
