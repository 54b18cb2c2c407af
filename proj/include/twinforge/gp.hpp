#pragma once

// Binary GP classification over SE(3) poses: product squared-exponential
// kernel, Laplace approximation with a logistic likelihood.

#include <filesystem>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "twinforge/strategy.hpp"

namespace twinforge {

struct Se3KernelParams {
  double signal_variance = 1.0;
  double translation_length = 0.05;  // meters
  double rotation_length = 0.5;      // chordal quaternion units
  double jitter = 1e-6;

  void validate() const;
};

/// sigma^2 exp(-|ta - tb|^2 / 2 lt^2) exp(-dq^2 / 2 lr^2), dq chordal.
double se3_kernel(const RigidPose& a, const RigidPose& b, const Se3KernelParams& params);

/// Gram matrix plus jitter on the diagonal.
Eigen::MatrixXd se3_gram(const std::vector<RigidPose>& poses, const Se3KernelParams& params);

struct GpFitOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  /// 3x3x3 grid of {1/2, 1, 2} multipliers on sigma^2, lt and lr, chosen by
  /// the approximate marginal likelihood.
  bool grid_search = false;
};

struct GpModel {
  std::vector<RigidPose> poses;
  std::vector<int> labels;  // 0 / 1
  Se3KernelParams params;
  /// All labels equal: predictions are (sum y + 1) / (n + 2).
  bool degenerate = false;
  double degenerate_rate = 0.5;
  /// Posterior mode of the latent function and the Laplace quantities.
  Eigen::VectorXd mode;
  Eigen::VectorXd gradient;  // d log p(y | f) / df at the mode
  Eigen::VectorXd sqrt_w;
  Eigen::MatrixXd chol_b;    // lower factor of I + W^1/2 K W^1/2
  int iterations = 0;
  double log_marginal = 0.0;
};

GpModel gp_fit(const std::vector<RigidPose>& poses, const std::vector<int>& labels,
               const Se3KernelParams& params = {}, const GpFitOptions& options = {});

/// Uses the samples that carry a weak label.
GpModel gp_fit(const std::vector<StrategySample>& samples, const Se3KernelParams& params = {},
               const GpFitOptions& options = {});

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
  double probability = 0.5;
};

/// sigma(mean / sqrt(1 + pi var / 8)).
GpPrediction gp_predict(const GpModel& model, const RigidPose& pose);
double predict_prob(const GpModel& model, const RigidPose& pose);

struct Ranking {
  /// Descending probability, ties by sample_id.
  std::vector<StrategySample> ranked;
  /// The ranked samples whose weak label is true, in ranked order.
  std::vector<StrategySample> priority;
  const StrategySample& best() const { return ranked.front(); }
};

/// Annotates success_prob on every candidate and ranks them.
Ranking rank_and_select(const GpModel& model, const std::vector<StrategySample>& candidates);

/// ASCII dump: params, then one line per training point (pose, label, mode).
void write_gp_model(const std::filesystem::path& path, const GpModel& model);

}  // namespace twinforge
