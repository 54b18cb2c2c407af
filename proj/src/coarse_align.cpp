#include "twinforge/coarse_align.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "twinforge/parallel.hpp"
#include "twinforge/random.hpp"

namespace twinforge {

std::vector<Eigen::Quaterniond> cube_yaw_rotations() {
  // Signed permutation matrices with determinant +1, identity first.
  std::vector<Mat3> cube;
  const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}};
  for (const auto& p : perms) {
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 m = Mat3::Zero();
      for (int i = 0; i < 3; ++i) m(i, p[i]) = (signs >> i) & 1 ? -1.0 : 1.0;
      if (m.determinant() > 0.0) cube.push_back(m);
    }
  }
  std::vector<Eigen::Quaterniond> out;
  out.reserve(cube.size() * 3);
  for (const Mat3& m : cube) {
    for (int yaw = 0; yaw < 3; ++yaw) {
      const Mat3 y = Eigen::AngleAxisd(yaw * M_PI / 6.0, Vec3::UnitZ()).toRotationMatrix();
      out.push_back(Eigen::Quaterniond(m * y).normalized());
    }
  }
  return out;
}

PoseHypothesisSet generate_hypotheses(const Vec3& anchor_translation, std::size_t rotation_count,
                                      std::uint64_t seed) {
  if (rotation_count == 0) throw InvalidInput("generate_hypotheses: rotation_count must be >= 1");
  PoseHypothesisSet set;
  set.anchor = anchor_translation;
  set.rotation_count = rotation_count;
  set.seed = seed;
  const auto grid = cube_yaw_rotations();
  for (std::size_t i = 0; i < std::min(rotation_count, grid.size()); ++i) {
    set.poses.emplace_back(grid[i], anchor_translation);
  }
  Rng rng(seed);
  while (set.poses.size() < rotation_count) set.poses.emplace_back(rng.rotation(), anchor_translation);
  return set;
}

Image<double> resize_area(const Image<double>& src, int width, int height) {
  Image<double> dst(width, height, 0.0);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double y0 = y * sy, y1 = (y + 1) * sy;
    for (int x = 0; x < width; ++x) {
      const double x0 = x * sx, x1 = (x + 1) * sx;
      double sum = 0.0;
      for (int iy = static_cast<int>(y0); iy < std::min(src.height, static_cast<int>(std::ceil(y1))); ++iy) {
        const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
        if (wy <= 0.0) continue;
        for (int ix = static_cast<int>(x0); ix < std::min(src.width, static_cast<int>(std::ceil(x1))); ++ix) {
          const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
          if (wx <= 0.0) continue;
          sum += wx * wy * src.at(ix, iy);
        }
      }
      dst.at(x, y) = sum / (sx * sy);
    }
  }
  return dst;
}

FeatureVector GridDescriptor::extract(const ColorImage& image) const {
  FeatureVector out;
  out.values.assign(dimension(), 0.0);
  if (image.width <= 0 || image.height <= 0) return out;

  Image<double> luma(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Color& c = image.values[i];
    luma.values[i] = 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z();
  }
  const Image<double> small = resize_area(luma, kImageSize, kImageSize);
  auto px = [&](int x, int y) {
    return small.at(std::clamp(x, 0, kImageSize - 1), std::clamp(y, 0, kImageSize - 1));
  };

  constexpr int cell = kImageSize / kCells;
  constexpr double inv_pixels = 1.0 / (cell * cell);
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t base = static_cast<std::size_t>((y / cell) * kCells + x / cell) * (kBins + 1);
      out.values[base] += small.at(x, y) * inv_pixels;
      const double mag = std::hypot(gx, gy);
      if (mag > 1e-12) {
        double angle = std::atan2(gy, gx);
        if (angle < 0.0) angle += 2.0 * M_PI;
        const int bin = std::min(kBins - 1, static_cast<int>(angle / (2.0 * M_PI / kBins)));
        out.values[base + 1 + bin] += mag * inv_pixels;
      }
    }
  }
  double norm = 0.0;
  for (double v : out.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : out.values) v /= norm;
  }
  return out;
}

FeatureVector grid_descriptor(const ColorImage& image) { return GridDescriptor{}.extract(image); }

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) throw InvalidInput("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidInput("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

ColorImage mask_observation(const ColorImage& observation, const BinaryMask& mask,
                            const Color& background) {
  if (!mask.same_shape(observation.width, observation.height)) {
    throw InvalidInput("mask_observation: mask size differs from image");
  }
  ColorImage out = observation;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.values[i]) out.values[i] = background;
  }
  return out;
}

ColorImage crop_to_mask(const ColorImage& image, const BinaryMask& mask, double margin,
                        const Color& background) {
  int u0 = image.width, u1 = -1, v0 = image.height, v1 = -1;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.at(u, v)) continue;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
  }
  if (u1 < 0) return image;
  const int side = std::max(1, static_cast<int>(std::ceil(std::max(u1 - u0 + 1, v1 - v0 + 1) *
                                                          (1.0 + margin))));
  const double cu = 0.5 * (u0 + u1 + 1), cv = 0.5 * (v0 + v1 + 1);
  const int left = static_cast<int>(std::floor(cu - 0.5 * side));
  const int top = static_cast<int>(std::floor(cv - 0.5 * side));
  ColorImage out(side, side, background);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const int u = left + x, v = top + y;
      if (u >= 0 && v >= 0 && u < image.width && v < image.height) out.at(x, y) = image.at(u, v);
    }
  }
  return out;
}

namespace {

FeatureVector observation_features(const ColorImage& observation, const BinaryMask& obs_mask,
                                   const CameraIntrinsics& intrinsics,
                                   const ViewFeatureExtractor& extractor,
                                   const CoarseAlignOptions& options) {
  if (!observation.same_shape(intrinsics.width, intrinsics.height)) {
    throw InvalidInput("select_coarse_pose: observation size differs from intrinsics");
  }
  const Color& bg = options.render.background;
  ColorImage obs = mask_observation(observation, obs_mask, bg);
  if (options.crop_to_object) obs = crop_to_mask(obs, obs_mask, options.crop_margin, bg);
  return extractor.extract(obs);
}

/// Similarity of one rendered hypothesis; -1 when the mesh is not visible.
double score_pose(const TriangleMesh& mesh, const RigidPose& pose, const CameraIntrinsics& render_k,
                  const FeatureVector& obs_features, const ViewFeatureExtractor& extractor,
                  const CoarseAlignOptions& options) {
  const RenderedView view = render(mesh, pose, render_k, options.render);
  const BinaryMask covered = coverage_mask(view);
  if (mask_count(covered) == 0) return -1.0;
  const ColorImage img = options.crop_to_object
                             ? crop_to_mask(view.rgb, covered, options.crop_margin, options.render.background)
                             : view.rgb;
  return cosine_similarity(extractor.extract(img), obs_features);
}

}  // namespace

CameraIntrinsics hypothesis_intrinsics(const TriangleMesh& mesh, const Vec3& anchor,
                                       const CameraIntrinsics& intrinsics, const CoarseAlignOptions& options) {
  if (options.object_pixels <= 0 || !(anchor.z() > 0.0)) return intrinsics.rescaled(options.render_size);
  const double diameter_px = intrinsics.fx * mesh_diameter(mesh) / anchor.z();
  if (!(diameter_px > 0.0)) return intrinsics.rescaled(options.render_size);
  const double s = options.object_pixels / diameter_px;
  const Eigen::Vector2d c = intrinsics.project(anchor);
  CameraIntrinsics k;
  k.width = k.height = 2 * options.object_pixels;
  k.fx = intrinsics.fx * s;
  k.fy = intrinsics.fy * s;
  k.cx = 0.5 * k.width + (intrinsics.cx - c.x()) * s;
  k.cy = 0.5 * k.height + (intrinsics.cy - c.y()) * s;
  return k;
}

CoarseAlignment select_coarse_pose(const TriangleMesh& mesh, const PoseHypothesisSet& hypotheses,
                                   const ColorImage& observation, const BinaryMask& obs_mask,
                                   const CameraIntrinsics& intrinsics,
                                   const ViewFeatureExtractor& extractor,
                                   const CoarseAlignOptions& options) {
  if (hypotheses.poses.empty()) throw InvalidInput("select_coarse_pose: empty hypothesis set");
  const FeatureVector obs_features =
      observation_features(observation, obs_mask, intrinsics, extractor, options);
  const CameraIntrinsics render_k = hypothesis_intrinsics(mesh, hypotheses.anchor, intrinsics, options);
  std::vector<double> scores(hypotheses.poses.size(), -1.0);
  parallel_for(hypotheses.poses.size(), [&](std::size_t i) {
    scores[i] = score_pose(mesh, hypotheses.poses[i], render_k, obs_features, extractor, options);
  });

  CoarseAlignment out;
  out.all_scores.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.all_scores.emplace_back(i, scores[i]);
    if (i == 0 || scores[i] > out.similarity) {
      out.similarity = scores[i];
      out.best_index = i;
    }
  }
  out.best_pose = hypotheses.poses[out.best_index];
  out.rendered_partial = partial_cloud_from_pose(mesh, out.best_pose, intrinsics, options.render);
  return out;
}

RefinedCoarsePose refine_coarse_pose(const TriangleMesh& mesh, const PoseHypothesisSet& hypotheses,
                                     const CoarseAlignment& coarse, const ColorImage& observation,
                                     const BinaryMask& obs_mask, const CameraIntrinsics& intrinsics,
                                     const ViewFeatureExtractor& extractor,
                                     const CoarseAlignOptions& options,
                                     const CoarseRefineOptions& refine) {
  RefinedCoarsePose best{coarse.best_pose, coarse.similarity, 0};
  if (refine.starts == 0 || coarse.all_scores.empty()) return best;
  const FeatureVector obs_features =
      observation_features(observation, obs_mask, intrinsics, extractor, options);
  const CameraIntrinsics render_k = hypothesis_intrinsics(mesh, hypotheses.anchor, intrinsics, options);

  auto ranked = coarse.all_scores;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize(std::min(ranked.size(), refine.starts));

  constexpr double kDeg = M_PI / 180.0;
  for (const auto& [index, start_score] : ranked) {
    RigidPose pose = hypotheses.poses[index];
    double score = start_score;
    double step = refine.initial_step_deg;
    int moves_left = 200;
    while (step >= refine.final_step_deg && moves_left-- > 0) {
      std::array<RigidPose, 6> moves;
      for (int k = 0; k < 6; ++k) {
        const Vec3 axis = Vec3::Unit(k / 2);
        const double angle = (k % 2 == 0 ? step : -step) * kDeg;
        moves[k] = RigidPose(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis)) * pose.rotation,
                             pose.translation);
      }
      std::array<double, 6> scores;
      parallel_for(6, [&](std::size_t k) {
        scores[k] = score_pose(mesh, moves[k], render_k, obs_features, extractor, options);
      });
      best.evaluations += 6;
      const auto it = std::max_element(scores.begin(), scores.end());
      if (*it > score) {
        score = *it;
        pose = moves[static_cast<std::size_t>(it - scores.begin())];
      } else {
        step *= 0.5;
      }
    }
    if (score > best.similarity) {
      best.similarity = score;
      best.pose = pose;
    }
  }
  return best;
}

PointCloud partial_cloud_from_pose(const TriangleMesh& mesh, const RigidPose& pose,
                                   const CameraIntrinsics& intrinsics,
                                   const RenderOptions& options) {
  const RenderedView view = render(mesh, pose, intrinsics, options);
  return backproject(view.depth, intrinsics);
}

void write_score_table(const std::filesystem::path& path, const PoseHypothesisSet& hypotheses,
                       const CoarseAlignment& alignment) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "index,w,x,y,z,similarity\n";
  for (const auto& [i, s] : alignment.all_scores) {
    const auto& q = hypotheses.poses[i].rotation;
    out << i << "," << q.w() << "," << q.x() << "," << q.y() << "," << q.z() << "," << s << "\n";
  }
}

}  // namespace twinforge
