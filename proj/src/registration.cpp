#include "twinforge/registration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "twinforge/parallel.hpp"
#include "twinforge/random.hpp"

namespace twinforge {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr int kFpfhBins = 11;

int bin_of(double value, double lo, double hi) {
  const int b = static_cast<int>(std::floor(kFpfhBins * (value - lo) / (hi - lo)));
  return std::clamp(b, 0, kFpfhBins - 1);
}

}  // namespace

ScaleEstimate estimate_scale(const PointCloud& rendered_partial, const PointCloud& observed_partial) {
  if (rendered_partial.empty() || observed_partial.empty()) {
    throw InvalidInput("estimate_scale: empty cloud");
  }
  constexpr double kMinExtent = 1e-4;
  const Vec3 rendered = compute_aabb(rendered_partial).extent();
  const Vec3 observed = compute_aabb(observed_partial).extent();
  std::vector<double> ratios;
  for (int k = 0; k < 3; ++k) {
    if (rendered[k] >= kMinExtent) ratios.push_back(observed[k] / rendered[k]);
  }
  ScaleEstimate out;
  const double fallback = ratios.empty() ? 1.0 : median_of(ratios);
  for (int k = 0; k < 3; ++k) {
    const double r = rendered[k] >= kMinExtent ? observed[k] / rendered[k] : fallback;
    out.per_axis[k] = std::clamp(r, kMinScale, kMaxScale);
  }
  out.uniform = median_of({out.per_axis.x(), out.per_axis.y(), out.per_axis.z()});
  return out;
}

std::size_t NormalEstimate::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

CovarianceEigen neighborhood_eigen(const std::vector<Vec3>& points) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k) {
  if (cloud.size() <= k) throw InvalidInput("estimate_normals: cloud must have more than k points");
  const KdTree tree(cloud.points);
  NormalEstimate out;
  out.normals.assign(cloud.size(), Vec3::Zero());
  out.valid.assign(cloud.size(), 0);
  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nn = tree.knn(cloud.points[i], k);
    std::vector<Vec3> pts;
    pts.reserve(nn.size());
    for (const auto& n : nn) pts.push_back(cloud.points[n.index]);
    const CovarianceEigen eig = neighborhood_eigen(pts);
    // Rank >= 2 needs two eigenvalues clearly above zero.
    if (!(eig.eigenvalues[1] > 1e-12 * std::max(1.0, eig.eigenvalues[2]) && eig.eigenvalues[1] > 1e-14)) {
      return;
    }
    Vec3 n = eig.eigenvectors.col(0).normalized();
    if (n.dot(-cloud.points[i]) < 0.0) n = -n;
    out.normals[i] = n;
    out.valid[i] = 1;
  });
  return out;
}

double mean_nn_spacing(const PointCloud& cloud) {
  if (cloud.size() < 2) return 0.0;
  const KdTree tree(cloud.points);
  double sum = 0.0;
  for (const auto& p : cloud.points) {
    const auto nn = tree.knn(p, 2);
    sum += std::sqrt(nn.back().squared_distance);
  }
  return sum / static_cast<double>(cloud.size());
}

std::array<double, 4> pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2) {
  Vec3 dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) return {0.0, 0.0, 0.0, 0.0};
  Vec3 src_n = n1, tgt_n = n2;
  double cos1 = n1.dot(dp) / dist;
  const double cos2 = n2.dot(dp) / dist;
  // The source is the endpoint whose normal makes the smaller angle with the
  // connecting line, which makes the features symmetric in the pair. Equal
  // angles (parallel normals) take the orientation with the larger cosine so
  // rounding noise cannot flip the pair.
  constexpr double kTie = 1e-9;
  const double angle1 = std::acos(std::min(1.0, std::abs(cos1)));
  const double angle2 = std::acos(std::min(1.0, std::abs(cos2)));
  if (angle1 > angle2 + kTie || (std::abs(angle1 - angle2) <= kTie && -cos2 > cos1)) {
    std::swap(src_n, tgt_n);
    dp = -dp;
    cos1 = -cos2;
  }
  Vec3 v = dp.cross(src_n);
  const double v_norm = v.norm();
  if (v_norm == 0.0) return {0.0, 0.0, cos1, dist};
  v /= v_norm;
  const Vec3 w = src_n.cross(v);
  const double alpha = v.dot(tgt_n);
  const double theta = std::atan2(w.dot(tgt_n), src_n.dot(tgt_n));
  return {theta, alpha, cos1, dist};
}

std::vector<FpfhDescriptor> compute_fpfh(const PointCloud& cloud, const NormalEstimate& normals,
                                         double radius) {
  if (!(radius > 0.0)) throw InvalidInput("compute_fpfh: radius must be positive");
  if (normals.normals.size() != cloud.size()) throw InvalidInput("compute_fpfh: normal count mismatch");
  const std::size_t n = cloud.size();
  std::vector<FpfhDescriptor> out(n);
  for (auto& d : out) d.fill(0.0);
  if (n == 0) return out;

  // Neighborhoods restricted to valid-normal points.
  std::vector<Vec3> valid_points;
  std::vector<std::size_t> valid_index;
  for (std::size_t i = 0; i < n; ++i) {
    if (normals.valid[i]) {
      valid_points.push_back(cloud.points[i]);
      valid_index.push_back(i);
    }
  }
  const KdTree tree(valid_points);
  std::vector<std::vector<Neighbor>> neighborhoods(n);
  std::vector<FpfhDescriptor> spfh(n);
  parallel_for(n, [&](std::size_t i) {
    spfh[i].fill(0.0);
    if (!normals.valid[i] || tree.empty()) return;
    auto found = tree.radius_search(cloud.points[i], radius);
    std::vector<Neighbor> nbrs;
    for (const auto& f : found) {
      const std::size_t j = valid_index[f.index];
      if (j != i && f.squared_distance > 0.0) nbrs.push_back({j, f.squared_distance});
    }
    if (nbrs.empty()) return;
    const double inc = 1.0 / static_cast<double>(nbrs.size());
    for (const auto& nb : nbrs) {
      const auto f = pair_features(cloud.points[i], normals.normals[i], cloud.points[nb.index],
                                   normals.normals[nb.index]);
      spfh[i][bin_of(f[0], -M_PI, M_PI)] += inc;
      spfh[i][kFpfhBins + bin_of(f[1], -1.0, 1.0)] += inc;
      spfh[i][2 * kFpfhBins + bin_of(f[2], -1.0, 1.0)] += inc;
    }
    neighborhoods[i] = std::move(nbrs);
  });

  parallel_for(n, [&](std::size_t i) {
    const auto& nbrs = neighborhoods[i];
    if (nbrs.empty()) return;
    FpfhDescriptor acc = spfh[i];
    double weight_sum = 0.0;
    FpfhDescriptor agg;
    agg.fill(0.0);
    for (const auto& nb : nbrs) {
      const double w = 1.0 / std::sqrt(nb.squared_distance);
      weight_sum += w;
      for (int b = 0; b < 33; ++b) agg[b] += w * spfh[nb.index][b];
    }
    for (int b = 0; b < 33; ++b) acc[b] += agg[b] / weight_sum;
    const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
    if (total > 0.0) {
      for (double& v : acc) v /= total;
    }
    out[i] = acc;
  });
  return out;
}

double descriptor_l1(const FpfhDescriptor& a, const FpfhDescriptor& b) {
  double s = 0.0;
  for (int i = 0; i < 33; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

RigidPose kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.empty()) throw InvalidInput("kabsch: bad correspondence set");
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return RigidPose(r, cd - r * cs);
}

namespace {

constexpr std::size_t kNoMatch = std::numeric_limits<std::size_t>::max();

bool is_zero(const FpfhDescriptor& d) {
  return std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
}

double descriptor_dist2(const FpfhDescriptor& a, const FpfhDescriptor& b) {
  double s = 0.0;
  for (int i = 0; i < 33; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// For each descriptor in `from`, the index of its nearest nonzero
/// descriptor in `to` (lowest index on ties).
std::vector<std::size_t> nearest_descriptors(const std::vector<FpfhDescriptor>& from,
                                             const std::vector<FpfhDescriptor>& to) {
  std::vector<std::uint8_t> to_ok(to.size());
  for (std::size_t j = 0; j < to.size(); ++j) to_ok[j] = !is_zero(to[j]);
  std::vector<std::size_t> best(from.size(), kNoMatch);
  parallel_for(from.size(), [&](std::size_t i) {
    if (is_zero(from[i])) return;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.size(); ++j) {
      if (!to_ok[j]) continue;
      const double d = descriptor_dist2(from[i], to[j]);
      if (d < best_d) {
        best_d = d;
        best[i] = j;
      }
    }
  });
  return best;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> mutual_correspondences(
    const std::vector<FpfhDescriptor>& source, const std::vector<FpfhDescriptor>& target) {
  const auto forward = nearest_descriptors(source, target);
  const auto backward = nearest_descriptors(target, source);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const std::size_t j = forward[i];
    if (j != kNoMatch && backward[j] == i) out.emplace_back(i, j);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> forward_correspondences(
    const std::vector<FpfhDescriptor>& source, const std::vector<FpfhDescriptor>& target) {
  const auto forward = nearest_descriptors(source, target);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (forward[i] != kNoMatch) out.emplace_back(i, forward[i]);
  }
  return out;
}

namespace {

struct Score {
  std::size_t inliers = 0;
  double sq_error = 0.0;
};

Score score_model(const std::vector<Vec3>& source, const KdTree& target, const RigidPose& pose,
                  double threshold) {
  Score s;
  const double t2 = threshold * threshold;
  const Mat3 r = pose.rotation_matrix();
  for (const auto& p : source) {
    const Neighbor nn = target.nearest(r * p + pose.translation);
    if (nn.squared_distance <= t2) {
      ++s.inliers;
      s.sq_error += nn.squared_distance;
    }
  }
  return s;
}

bool better(const Score& a, const Score& b) {
  return a.inliers > b.inliers || (a.inliers == b.inliers && a.inliers > 0 && a.sq_error < b.sq_error);
}

}  // namespace

RegistrationResult ransac_register(const PointCloud& source, const PointCloud& target,
                                   const std::vector<FpfhDescriptor>& source_features,
                                   const std::vector<FpfhDescriptor>& target_features,
                                   const RansacParams& params) {
  if (source_features.size() != source.size() || target_features.size() != target.size()) {
    throw InvalidInput("ransac_register: descriptor count mismatch");
  }
  RegistrationResult result;
  auto corr = params.mutual_filter ? mutual_correspondences(source_features, target_features)
                                   : forward_correspondences(source_features, target_features);
  if (params.mutual_filter && corr.size() < params.min_mutual) {
    corr = forward_correspondences(source_features, target_features);
  }
  if (corr.size() < 3 || source.size() < 3 || target.size() < 3) return result;

  // Draw all samples up front so parallel evaluation sees the same sequence.
  Rng rng(params.seed);
  std::vector<std::array<std::size_t, 3>> samples(params.max_trials);
  for (auto& s : samples) {
    s[0] = rng.index(corr.size());
    do s[1] = rng.index(corr.size()); while (s[1] == s[0]);
    do s[2] = rng.index(corr.size()); while (s[2] == s[0] || s[2] == s[1]);
  }

  const KdTree target_tree(target.points);
  std::vector<Score> scores(samples.size());
  std::vector<RigidPose> models(samples.size());
  parallel_for(samples.size(), [&](std::size_t t) {
    std::vector<Vec3> src(3), dst(3);
    for (int k = 0; k < 3; ++k) {
      src[k] = source.points[corr[samples[t][k]].first];
      dst[k] = target.points[corr[samples[t][k]].second];
    }
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3;
      const double ls = (src[a] - src[b]).norm(), ld = (dst[a] - dst[b]).norm();
      if (ls < params.edge_length_ratio * ld || ld < params.edge_length_ratio * ls) return;
    }
    if ((src[1] - src[0]).cross(src[2] - src[0]).norm() < 1e-10) return;
    const RigidPose model = kabsch(src, dst);
    if (params.max_rotation_rad &&
        rotation_angle_between(model.rotation, Eigen::Quaterniond::Identity()) > *params.max_rotation_rad) {
      return;
    }
    models[t] = model;
    scores[t] = score_model(source.points, target_tree, model, params.inlier_threshold);
  });

  std::size_t best_trial = samples.size();
  for (std::size_t t = 0; t < samples.size(); ++t) {
    if (scores[t].inliers == 0) continue;
    if (best_trial == samples.size() || better(scores[t], scores[best_trial])) best_trial = t;
  }
  result.iterations = samples.size();
  if (best_trial == samples.size()) return result;

  RigidPose best = models[best_trial];
  Score best_score = scores[best_trial];
  // Refit on every inlier of the winning model.
  {
    const double t2 = params.inlier_threshold * params.inlier_threshold;
    std::vector<Vec3> src, dst;
    for (const auto& p : source.points) {
      const Vec3 q = best * p;
      const Neighbor nn = target_tree.nearest(q);
      if (nn.squared_distance <= t2) {
        src.push_back(p);
        dst.push_back(target.points[nn.index]);
      }
    }
    if (src.size() >= 3) {
      const RigidPose refit = kabsch(src, dst);
      const Score refit_score = score_model(source.points, target_tree, refit, params.inlier_threshold);
      const bool rotation_ok =
          !params.max_rotation_rad ||
          rotation_angle_between(refit.rotation, Eigen::Quaterniond::Identity()) <= *params.max_rotation_rad;
      if (rotation_ok && !better(best_score, refit_score)) {
        best = refit;
        best_score = refit_score;
      }
    }
  }
  result.pose = best;
  result.inlier_fraction = static_cast<double>(best_score.inliers) / static_cast<double>(source.size());
  result.rmse = std::sqrt(best_score.sq_error / static_cast<double>(best_score.inliers));
  result.converged = result.inlier_fraction >= params.min_inlier_fraction;
  return result;
}

namespace {

struct Correspondences {
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  double rmse = std::numeric_limits<double>::max();
};

Correspondences correspond(const PointCloud& source, const KdTree& target, const RigidPose& pose,
                           double max_distance) {
  Correspondences c;
  const double d2 = max_distance * max_distance;
  double sum = 0.0;
  const Mat3 r = pose.rotation_matrix();
  for (const auto& p : source.points) {
    const Vec3 q = r * p + pose.translation;
    const Neighbor nn = target.nearest(q);
    if (nn.squared_distance <= d2) {
      c.src.push_back(q);
      c.dst.push_back(target.points()[nn.index]);
      sum += nn.squared_distance;
    }
  }
  if (!c.src.empty()) c.rmse = std::sqrt(sum / static_cast<double>(c.src.size()));
  return c;
}

}  // namespace

RegistrationResult icp_refine(const PointCloud& source, const PointCloud& target,
                              const RigidPose& init, const IcpParams& params) {
  if (source.empty() || target.empty()) throw InvalidInput("icp_refine: empty cloud");
  RegistrationResult result;
  result.pose = init;
  const KdTree tree(target.points);
  Correspondences current = correspond(source, tree, init, params.max_correspondence_distance);
  if (current.src.size() < 3) {
    result.rmse = std::numeric_limits<double>::max();
    return result;
  }
  result.rmse_history.push_back(current.rmse);
  RigidPose pose = init;
  bool settled = false;
  std::size_t it = 0;
  for (; it < params.max_iterations; ++it) {
    const RigidPose delta = kabsch(current.src, current.dst);
    const RigidPose candidate = delta * pose;
    Correspondences next = correspond(source, tree, candidate, params.max_correspondence_distance);
    if (next.src.size() < 3 || next.rmse > current.rmse) {
      settled = true;
      break;
    }
    pose = candidate;
    result.rmse_history.push_back(next.rmse);
    const double change = current.rmse - next.rmse;
    current = std::move(next);
    if (change < params.tolerance) {
      settled = true;
      ++it;
      break;
    }
  }
  result.pose = pose;
  result.rmse = current.rmse;
  result.iterations = it;
  result.inlier_fraction = static_cast<double>(current.src.size()) / static_cast<double>(source.size());
  result.converged = settled;
  return result;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) return cloud;
  struct Acc {
    Vec3 sum = Vec3::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    std::size_t count = 0;
  };
  std::map<std::tuple<long, long, long>, Acc> grid;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto key = std::make_tuple(static_cast<long>(std::floor(p.x() / voxel)),
                                     static_cast<long>(std::floor(p.y() / voxel)),
                                     static_cast<long>(std::floor(p.z() / voxel)));
    Acc& a = grid[key];
    a.sum += p;
    if (cloud.has_colors()) a.color += cloud.colors[i].cast<double>();
    ++a.count;
  }
  PointCloud out;
  out.points.reserve(grid.size());
  for (const auto& [key, a] : grid) {
    out.points.push_back(a.sum / static_cast<double>(a.count));
    if (cloud.has_colors()) out.colors.push_back((a.color / static_cast<double>(a.count)).cast<float>());
  }
  return out;
}

}  // namespace twinforge
