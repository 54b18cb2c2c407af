#include "twinforge/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "twinforge/kdtree.hpp"

namespace twinforge {

void GraspCandidate::validate() const {
  if (!(width >= 0.0)) throw InvalidInput("grasp width must be >= 0");
  if (!(confidence >= 0.0)) throw InvalidInput("grasp confidence must be >= 0");
  if (std::abs(pose.rotation.norm() - 1.0) > 1e-6) throw InvalidInput("grasp rotation is not unit");
}

std::vector<GraspCandidate> read_grasp_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grasp file " + path.string());
  std::vector<GraspCandidate> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::array<double, 12> v{};
    std::size_t n = 0;
    double x;
    while (n < v.size() && ss >> x) v[n++] = x;
    if (n == 0 && ss.eof()) continue;
    std::string rest;
    if (n != v.size() || (ss >> rest)) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected 12 numbers");
    }
    GraspCandidate g;
    const Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);
    if (std::abs(q.norm() - 1.0) > 1e-3) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": quaternion is not unit");
    }
    g.pose = RigidPose(q, Vec3(v[4], v[5], v[6]));
    g.grasp_point = Vec3(v[7], v[8], v[9]);
    g.width = v[10];
    g.confidence = v[11];
    g.validate();
    out.push_back(g);
  }
  return out;
}

void write_grasp_candidates(const std::filesystem::path& path,
                            const std::vector<GraspCandidate>& candidates) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# qw qx qy qz tx ty tz gx gy gz width confidence\n";
  out.precision(17);
  for (const auto& g : candidates) {
    const auto a = g.pose.to_array();
    for (double x : a) out << x << ' ';
    out << g.grasp_point.x() << ' ' << g.grasp_point.y() << ' ' << g.grasp_point.z() << ' '
        << g.width << ' ' << g.confidence << '\n';
  }
}

std::vector<GraspCandidate> top_k_by_confidence(const std::vector<GraspCandidate>& candidates,
                                                std::size_t k) {
  if (k == 0) throw InvalidInput("top_k_by_confidence: k must be >= 1");
  std::vector<GraspCandidate> out = candidates;
  std::stable_sort(out.begin(), out.end(), [](const GraspCandidate& a, const GraspCandidate& b) {
    return a.confidence > b.confidence;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<GraspCandidate> filter_by_object_proximity(const std::vector<GraspCandidate>& candidates,
                                                       const PointCloud& object_cloud,
                                                       double threshold) {
  if (object_cloud.empty()) throw InvalidInput("filter_by_object_proximity: empty object cloud");
  if (!(threshold > 0.0)) throw InvalidInput("filter_by_object_proximity: threshold must be > 0");
  const KdTree tree(object_cloud);
  const double t2 = threshold * threshold;
  std::vector<GraspCandidate> out;
  for (const auto& g : candidates) {
    if (tree.nearest(g.grasp_point).squared_distance <= t2) out.push_back(g);
  }
  return out;
}

const GraspCandidate& select_best_grasp(const std::vector<GraspCandidate>& candidates) {
  if (candidates.empty()) throw NoFeasibleGrasp();
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].confidence > candidates[best].confidence) best = i;
  }
  return candidates[best];
}

GraspSearch grasp_with_retry(GraspProvider& provider, const PointCloud& object_cloud,
                             const GraspCheck& check, const GraspSelectOptions& options) {
  if (options.max_attempts == 0) throw InvalidInput("grasp_with_retry: max_attempts must be >= 1");
  GraspSearch search;
  // Ranked once; each retry moves to the next-best survivor.
  const auto ranked = filter_by_object_proximity(top_k_by_confidence(provider.provide(), options.top_k),
                                                 object_cloud, options.proximity);
  for (std::size_t i = 0; i < ranked.size() && search.attempts.size() < options.max_attempts; ++i) {
    const bool ok = check(ranked[i]);
    search.attempts.push_back({i, ranked[i].confidence, ok});
    if (ok) {
      search.found = true;
      search.grasp = ranked[i];
      return search;
    }
  }
  search.failure = ranked.empty() ? "no-feasible-grasp"
                                  : "grasp-check-failed after " +
                                        std::to_string(search.attempts.size()) + " attempts";
  return search;
}

}  // namespace twinforge
