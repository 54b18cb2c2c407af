// One line per acceptance criterion: PASS or FAIL, the criterion, the numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gp_reference.hpp"
#include "helpers.hpp"
#include "twinforge/benchmark.hpp"
#include "twinforge/error.hpp"
#include "twinforge/gp.hpp"
#include "twinforge/grasp.hpp"
#include "twinforge/kdtree.hpp"
#include "twinforge/mesh_query.hpp"
#include "twinforge/parallel.hpp"
#include "twinforge/pipeline.hpp"
#include "twinforge/primitives.hpp"
#include "twinforge/random.hpp"
#include "twinforge/registration.hpp"
#include "twinforge/render.hpp"
#include "twinforge/scene_gen.hpp"
#include "twinforge/simulator.hpp"

using namespace twinforge;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict alignment_benchmark(const fs::path& out) {
  BenchmarkConfig config;
  const BenchmarkReport report = run_alignment_benchmark(config);
  write_benchmark_csv(out / "benchmark.csv", report);
  const double two = report.aggregate_success("two-stage");
  const double direct = report.aggregate_success("direct");
  double max_rmse = 0.0;
  for (const auto& row : report.rows) {
    for (const auto& o : row.outcomes) {
      if (o.success) max_rmse = std::max(max_rmse, o.rmse);
    }
  }
  std::string per_class;
  for (const auto& row : report.rows) {
    if (row.arm == "two-stage") per_class += fmt(" %s=%zu/%zu", row.object.c_str(), row.successes, row.trials);
  }
  Verdict v;
  v.pass = two - direct >= 0.15 && max_rmse < 0.01 && report.seconds < 600.0;
  v.detail = fmt("two-stage %.3f, direct %.3f, gap %.1f pp, max success rmse %.4f m, %.0f s;", two, direct,
                 100.0 * (two - direct), max_rmse, report.seconds) +
             per_class;
  return v;
}

Verdict icp_basin() {
  Rng rng(101);
  const CameraIntrinsics k = benchmark_intrinsics();
  const std::vector<std::string> classes = {"box", "cylinder", "cup", "open_box"};
  int recovered = 0, monotone = 0;
  const int trials = 50;
  double worst_rot = 0.0, worst_t = 0.0;
  for (int t = 0; t < trials; ++t) {
    const TriangleMesh mesh = make_primitive(benchmark_primitive(classes[t % classes.size()]));
    const RigidPose view(rng.rotation(), Vec3(0.0, 0.0, 0.5));
    PointCloud dense = backproject(render(mesh, view, k).depth, k);
    // 2000 distinct points, centred so the perturbation acts about the object.
    std::vector<std::size_t> idx(dense.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < 2000 && i < idx.size(); ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    PointCloud target;
    const Vec3 c = dense.centroid();
    for (std::size_t i = 0; i < 2000 && i < idx.size(); ++i) target.points.push_back(dense.points[idx[i]] - c);

    const RigidPose truth = RigidPose::from_axis_angle(rng.unit_vector(), rng.uniform(0.0, 10.0) * kDeg,
                                                       rng.unit_vector() * rng.uniform(0.0, 0.02));
    const PointCloud source = transform_cloud(target, truth.inverse());
    IcpParams params;
    params.max_iterations = 200;
    params.max_correspondence_distance = 0.05;
    params.tolerance = 1e-10;
    const RegistrationResult r = icp_refine(source, target, RigidPose::identity(), params);
    const double rot = rotation_angle_between(r.pose.rotation, truth.rotation) / kDeg;
    const double dt = (r.pose.translation - truth.translation).norm();
    worst_rot = std::max(worst_rot, rot);
    worst_t = std::max(worst_t, dt);
    if (rot <= 1.0 && dt <= 0.002) ++recovered;
    bool mono = !r.rmse_history.empty();
    for (std::size_t i = 1; i < r.rmse_history.size(); ++i) mono = mono && r.rmse_history[i] <= r.rmse_history[i - 1] + 1e-9;
    if (mono) ++monotone;
  }
  Verdict v;
  v.pass = recovered >= 0.95 * trials && monotone == trials;
  v.detail = fmt("recovered %d/%d, monotone rmse %d/%d, worst %.3f deg %.2e m", recovered, trials, monotone, trials,
                 worst_rot, worst_t);
  return v;
}

/// Latitude-longitude ellipsoid: every quad is planar, so the mesh is convex.
TriangleMesh random_convex_mesh(Rng& rng) {
  const int rings = 4 + static_cast<int>(rng.index(8)), segments = 6 + static_cast<int>(rng.index(14));
  const Vec3 radii(rng.uniform(0.02, 0.06), rng.uniform(0.02, 0.06), rng.uniform(0.02, 0.06));
  TriangleMesh m;
  m.vertices.push_back(Vec3(0, 0, radii.z()));
  for (int r = 1; r < rings; ++r) {
    const double theta = M_PI * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * M_PI * s / segments;
      m.vertices.push_back(Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta))
                               .cwiseProduct(radii));
    }
  }
  m.vertices.push_back(Vec3(0, 0, -radii.z()));
  const int bottom = static_cast<int>(m.vertices.size()) - 1;
  auto at = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) {
    m.triangles.push_back({0, at(1, s), at(1, s + 1)});
    for (int r = 1; r + 1 < rings; ++r) {
      m.triangles.push_back({at(r, s), at(r + 1, s), at(r + 1, s + 1)});
      m.triangles.push_back({at(r, s), at(r + 1, s + 1), at(r, s + 1)});
    }
    m.triangles.push_back({at(rings - 1, s), bottom, at(rings - 1, s + 1)});
  }
  return m;
}

Verdict rasterizer() {
  Rng rng(202);
  const CameraIntrinsics k{80.0, 80.0, 32.0, 32.0, 64, 64};
  std::size_t covered = 0, agree = 0;
  double worst_mesh = 1.0;
  for (int t = 0; t < 10; ++t) {
    const TriangleMesh mesh = random_convex_mesh(rng);
    const RigidPose pose(rng.rotation(), Vec3(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(0.3, 0.45)));
    const TriangleMesh posed = transform_mesh(mesh, pose);
    const RenderedView view = render(mesh, pose, k);
    std::size_t c = 0, a = 0;
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const double z = view.depth.at(u, v);
        if (!valid_depth(z)) continue;
        ++c;
        const auto hit = testutil::ray_depth(posed, Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0));
        if (hit && std::abs(*hit - z) < 1e-4) ++a;
      }
    }
    covered += c;
    agree += a;
    if (c) worst_mesh = std::min(worst_mesh, static_cast<double>(a) / c);
  }
  Verdict v;
  const double frac = covered ? static_cast<double>(agree) / covered : 0.0;
  v.pass = covered > 0 && frac >= 0.99;
  v.detail = fmt("%zu/%zu covered pixels within 1e-4 m (%.4f), worst mesh %.4f", agree, covered, frac, worst_mesh);
  return v;
}

RigidPose jittered(Rng& rng, const RigidPose& center, double dt, double drot_deg) {
  const RigidPose d = RigidPose::from_axis_angle(rng.unit_vector(), rng.uniform(0.0, drot_deg) * kDeg,
                                                 rng.unit_vector() * rng.uniform(0.0, dt));
  return RigidPose(d.rotation * center.rotation, center.translation + d.translation);
}

Verdict gp_checks() {
  Rng rng(303);
  const Se3KernelParams params;
  int factored = 0;
  for (int s = 0; s < 100; ++s) {
    std::vector<RigidPose> poses;
    for (int i = 0; i < 30; ++i) poses.push_back(testutil::random_pose(rng, 0.08));
    if (Eigen::LLT<Eigen::MatrixXd>(se3_gram(poses, params)).info() == Eigen::Success) ++factored;
  }

  double worst_ref = 0.0;
  for (int s = 0; s < 20; ++s) {
    const int n = 5 + static_cast<int>(rng.index(26));
    std::vector<RigidPose> poses;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      poses.push_back(testutil::random_pose(rng, 0.08));
      y.push_back(rng.uniform() < 0.5 ? 1 : 0);
    }
    if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })) y[0] = 1 - y[0];
    const GpModel m = gp_fit(poses, y, params);
    const gpref::DenseReference r = gpref::dense_fit(poses, y, params);
    worst_ref = std::max(worst_ref, (m.mode - r.f).cwiseAbs().maxCoeff());
    for (int t = 0; t < 5; ++t) {
      const RigidPose x = testutil::random_pose(rng, 0.08);
      const GpPrediction a = gp_predict(m, x), b = gpref::dense_predict(r, poses, x, params);
      worst_ref = std::max({worst_ref, std::abs(a.mean - b.mean), std::abs(a.variance - b.variance),
                            std::abs(a.probability - b.probability)});
    }
  }

  int ranked_right = 0;
  for (int s = 0; s < 100; ++s) {
    const RigidPose good(Eigen::Quaterniond::Identity(), Vec3(0.0, 0.0, 0.1));
    const RigidPose bad = RigidPose::from_axis_angle(Vec3::UnitZ(), M_PI / 2, Vec3(0.15, 0.0, 0.1));
    std::vector<StrategySample> train, candidates;
    int id = 0;
    for (int i = 0; i < 15; ++i) {
      for (const auto& [center, label] : {std::pair{good, true}, std::pair{bad, false}}) {
        StrategySample sample;
        sample.object_pose = jittered(rng, center, 0.01, 5.0);
        sample.sample_id = id++;
        sample.weak_label = label;
        train.push_back(sample);
      }
    }
    for (int i = 0; i < 20; ++i) {
      for (const auto& center : {good, bad}) {
        StrategySample sample;
        sample.object_pose = jittered(rng, center, 0.01, 5.0);
        sample.sample_id = id++;
        candidates.push_back(sample);
      }
    }
    const Ranking ranking = rank_and_select(gp_fit(train, params), candidates);
    const Vec3 best = ranking.best().object_pose.translation;
    if ((best - good.translation).norm() < (best - bad.translation).norm()) ++ranked_right;
  }

  std::vector<RigidPose> poses;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    poses.push_back(testutil::random_pose(rng, 0.08));
    y.push_back(i % 2);
  }
  const double far = predict_prob(gp_fit(poses, y, params), RigidPose(rng.rotation(), Vec3(10.0, -10.0, 10.0)));

  Verdict v;
  v.pass = factored == 100 && worst_ref <= 1e-6 && ranked_right == 100 && std::abs(far - 0.5) <= 0.02;
  v.detail = fmt("cholesky %d/100, dense reference gap %.2e, clusters ranked %d/100, far field %.4f", factored,
                 worst_ref, ranked_right, far);
  return v;
}

Verdict grasp_filter() {
  Rng rng(404);
  bool equal = true;
  for (int s = 0; s < 5; ++s) {
    PointCloud cloud;
    for (int i = 0; i < 10000; ++i) cloud.points.push_back(Vec3(rng.uniform(0, 0.1), rng.uniform(0, 0.1), rng.uniform(0, 0.02)));
    std::vector<GraspCandidate> candidates(1000);
    for (auto& c : candidates) {
      c.grasp_point = Vec3(rng.uniform(-0.05, 0.15), rng.uniform(-0.05, 0.15), rng.uniform(-0.03, 0.05));
      c.width = 0.05;
      c.confidence = rng.uniform();
    }
    const auto kept = filter_by_object_proximity(candidates, cloud, 0.01);
    std::vector<Vec3> expected;
    for (const auto& c : candidates) {
      const bool near = std::any_of(cloud.points.begin(), cloud.points.end(),
                                    [&](const Vec3& p) { return (p - c.grasp_point).norm() <= 0.01; });
      if (near) expected.push_back(c.grasp_point);
    }
    equal = equal && kept.size() == expected.size();
    for (std::size_t i = 0; equal && i < kept.size(); ++i) equal = kept[i].grasp_point == expected[i];
  }

  // 2500 candidates on 50 confidence levels: the top 1000 are the stable order.
  std::vector<GraspCandidate> many(2500);
  for (std::size_t i = 0; i < many.size(); ++i) {
    many[i].grasp_point = Vec3(static_cast<double>(i), 0, 0);
    many[i].width = 0.05;
    many[i].confidence = static_cast<double>(rng.index(50)) / 50.0;
  }
  std::vector<std::size_t> order(many.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return many[a].confidence > many[b].confidence; });
  const auto top = top_k_by_confidence(many, 1000);
  bool stable = top.size() == 1000;
  for (std::size_t i = 0; stable && i < top.size(); ++i) stable = top[i].grasp_point.x() == static_cast<double>(order[i]);

  // Only the 1001st-ranked candidate touches the object: it must not be used.
  struct Fixed : GraspProvider {
    std::vector<GraspCandidate> c;
    std::vector<GraspCandidate> provide() override { return c; }
  } provider;
  provider.c.resize(1001);
  for (std::size_t i = 0; i < provider.c.size(); ++i) {
    provider.c[i].grasp_point = Vec3(1.0, 1.0, 1.0);
    provider.c[i].width = 0.05;
    provider.c[i].confidence = 1.0 - 1e-4 * static_cast<double>(i);
  }
  provider.c.back().grasp_point = Vec3::Zero();
  PointCloud object;
  object.points.push_back(Vec3::Zero());
  const GraspSearch search = grasp_with_retry(provider, object, [](const GraspCandidate&) { return true; });
  const bool capped = !search.found && search.failure == "no-feasible-grasp";

  Verdict v;
  v.pass = equal && stable && capped;
  v.detail = fmt("kd-tree filter equals linear scan: %s, stable top-1000: %s, rank 1001 ignored: %s",
                 equal ? "yes" : "no", stable ? "yes" : "no", capped ? "yes" : "no");
  return v;
}

Verdict end_to_end(const fs::path& out) {
  std::string detail;
  bool pass = true;
  for (const auto& task : synthetic_tasks()) {
    int met = 0;
    for (int seed = 0; seed < 20; ++seed) {
      const fs::path dir = out / "e2e" / (task + "_" + std::to_string(seed));
      SceneGenOptions options;
      options.recipe = task;
      options.seed = static_cast<std::uint64_t>(seed);
      const SceneSpec scene = generate_synthetic_scene(dir / "scene", options);
      const RunReport report = run_pipeline(scene, PipelineConfig{});
      write_report(dir / "report.json", report);
      if (report.ground_truth_goal.value_or(false)) ++met;
    }
    pass = pass && met >= 18;
    detail += fmt("%s%s %d/20", detail.empty() ? "" : ", ", task.c_str(), met);
  }
  return {pass, detail};
}

Verdict determinism(const fs::path& out) {
  bool repeat = true, threads = true;
  for (const auto& task : synthetic_tasks()) {
    SceneGenOptions options;
    options.recipe = task;
    options.seed = 7;
    const SceneSpec scene = generate_synthetic_scene(out / "determinism" / task, options);
    set_thread_count(1);
    const std::string a = report_to_json(run_pipeline(scene, PipelineConfig{}), false).dump(2);
    const std::string b = report_to_json(run_pipeline(scene, PipelineConfig{}), false).dump(2);
    set_thread_count(4);
    const std::string c = report_to_json(run_pipeline(scene, PipelineConfig{}), false).dump(2);
    set_thread_count(1);
    repeat = repeat && a == b;
    threads = threads && a == c;
  }
  return {repeat && threads, fmt("repeated runs identical: %s, 4 threads match serial: %s", repeat ? "yes" : "no",
                                 threads ? "yes" : "no")};
}

/// Dense check, independent of the simulator's own sample points: 5000
/// surface samples on a second seed plus every vertex, each side against the
/// other.
double measured_penetration(const TriangleMesh& a, const RigidPose& pose_a, const TriangleMesh& b,
                            const RigidPose& pose_b) {
  const TriangleMesh wa = transform_mesh(a, pose_a), wb = transform_mesh(b, pose_b);
  const MeshQuery qa(wa), qb(wb);
  double d = 0.0;
  for (const auto& [from, into] : {std::pair{&wa, &qb}, std::pair{&wb, &qa}}) {
    for (const auto& p : sample_mesh_surface(*from, 5000, 991).points) d = std::max(d, into->penetration_depth(p));
    for (const auto& p : from->vertices) d = std::max(d, into->penetration_depth(p));
  }
  return d;
}

double com_z(const TriangleMesh& mesh, const RigidPose& pose) {
  return (pose * mass_properties(mesh).center_of_mass).z();
}

Verdict simulator_invariants() {
  Rng rng(505);
  const std::vector<std::string> supports = {"box:0.12,0.12,0.05", "open_box:0.14,0.14,0.06,0.005",
                                             "cylinder:0.06,0.04", "ramp:0.15,0.1,0.05"};
  const std::vector<std::string> movers = {"box:0.05,0.05,0.05", "cylinder:0.025,0.08", "cup:0.04,0.09,0.005",
                                           "box:0.04,0.06,0.1", "ramp:0.08,0.06,0.04"};
  SettleOptions options;
  options.render = false;
  int scenes = 0, clean = 0, no_rise = 0, equivariant = 0;
  double worst_pen = 0.0, worst_shift = 0.0;
  for (int s = 0; s < 100; ++s) {
    SceneTwin twin;
    const int n = 1 + static_cast<int>(rng.index(3));
    for (int i = 0; i < n; ++i) {
      const TriangleMesh m = make_primitive(supports[rng.index(supports.size())]);
      const RigidPose p = RigidPose::from_axis_angle(Vec3::UnitZ(), rng.uniform(0, 2 * M_PI),
                                                     Vec3(rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), 0.0));
      twin.objects.push_back({"s" + std::to_string(i), m, p, default_material(), ObjectRole::fixed});
    }
    const TriangleMesh mover = make_primitive(movers[rng.index(movers.size())]);
    twin.objects.push_back({"m", mover, RigidPose::identity(), default_material(), ObjectRole::manipulated});

    // Start above everything.
    RigidPose start(rng.rotation(), Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0));
    double lowest = 1e9;
    for (const auto& v : mover.vertices) lowest = std::min(lowest, (start * v).z());
    start.translation.z() = twin.bounds().max.z() - lowest + rng.uniform(0.005, 0.1);
    StrategySample sample;
    sample.object_pose = start;

    const SimOutcome o = settle_simulate(twin, sample, options);
    ++scenes;
    const std::size_t mi = twin.manipulated_index();
    const RigidPose& settled = o.settled_poses[mi];
    double pen = 0.0;
    for (const auto& v : mover.vertices) pen = std::max(pen, -(settled * v).z());
    for (std::size_t i = 0; i < twin.objects.size(); ++i) {
      if (i == mi) continue;
      pen = std::max(pen, measured_penetration(mover, settled, twin.objects[i].mesh, o.settled_poses[i]));
    }
    worst_pen = std::max(worst_pen, pen);
    if (!o.penetration && pen <= 1e-3) ++clean;
    if (com_z(mover, settled) <= com_z(mover, start) + 1e-9) ++no_rise;

    const Vec3 shift(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.0);
    SceneTwin moved = twin;
    for (auto& obj : moved.objects) obj.pose.translation += shift;
    StrategySample moved_sample = sample;
    moved_sample.object_pose.translation += shift;
    const SimOutcome mo = settle_simulate(moved, moved_sample, options);
    double gap = 0.0;
    for (std::size_t i = 0; i < o.settled_poses.size(); ++i) {
      RigidPose back = mo.settled_poses[i];
      back.translation -= shift;
      gap = std::max(gap, testutil::pose_gap(back, o.settled_poses[i]));
    }
    worst_shift = std::max(worst_shift, gap);
    if (gap <= 1e-6 && mo.stable == o.stable && mo.topple_steps == o.topple_steps) ++equivariant;
  }
  Verdict v;
  v.pass = clean == scenes && no_rise == scenes && equivariant == scenes;
  v.detail = fmt("no penetration %d/%d (worst %.2e m), com not raised %d/%d, translation equivariant %d/%d (worst %.2e)",
                 clean, scenes, worst_pen, no_rise, scenes, equivariant, scenes, worst_shift);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinforge acceptance checks"};
  std::string out = "acceptance_out";
  app.add_option("--out", out, "Directory for benchmark CSV, scenes and reports");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"alignment benchmark: two-stage beats direct by 15 pp, rmse < 0.01 m, under 10 min",
       [&] { return alignment_benchmark(out); }},
      {"icp basin: 95% of (10 deg, 2 cm) perturbations recovered to (1 deg, 2 mm), monotone rmse", icp_basin},
      {"rasterizer: 99% of covered pixels match the ray-cast depth within 1e-4 m", rasterizer},
      {"gp: positive-definite gram, dense reference, cluster ranking, far-field prior", gp_checks},
      {"grasp filter: exact against a linear scan, stable top-1000 cap", grasp_filter},
      {"end to end: at least 18 of 20 seeds per task reach the goal in ground truth",
       [&] { return end_to_end(out); }},
      {"determinism: repeated and multi-threaded plan reports are identical", [&] { return determinism(out); }},
      {"simulator: no penetration, com never rises, translation equivariance", simulator_invariants},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %zu %s | %s | %.1f s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
