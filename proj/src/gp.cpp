#include "twinforge/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "twinforge/parallel.hpp"

namespace twinforge {

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

GpModel laplace(const std::vector<RigidPose>& poses, const std::vector<int>& labels, const Se3KernelParams& params,
                const GpFitOptions& options) {
  GpModel m;
  m.poses = poses;
  m.labels = labels;
  m.params = params;
  const std::size_t n = poses.size();
  const Eigen::MatrixXd k = se3_gram(poses, params);
  Eigen::VectorXd t(n), f = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] ? 1.0 : 0.0;

  Eigen::VectorXd pi(n), grad(n), w(n), sw(n), a = Eigen::VectorXd::Zero(n);
  Eigen::LLT<Eigen::MatrixXd> llt;
  auto linearize = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      pi[i] = sigmoid(f[i]);
      grad[i] = t[i] - pi[i];
      w[i] = pi[i] * (1.0 - pi[i]);
      sw[i] = std::sqrt(w[i]);
    }
    const Eigen::MatrixXd b =
        Eigen::MatrixXd::Identity(n, n) + sw.asDiagonal() * k * sw.asDiagonal();
    llt.compute(b);
    if (llt.info() != Eigen::Success) throw InvalidInput("gp_fit: Cholesky of B failed");
  };

  for (m.iterations = 0; m.iterations < options.max_iterations;) {
    linearize();
    // Newton step in the a-parametrization (f = K a).
    const Eigen::VectorXd b = w.cwiseProduct(f) + grad;
    const Eigen::VectorXd c = llt.solve(sw.cwiseProduct(k * b));
    a = b - sw.cwiseProduct(c);
    const Eigen::VectorXd f_new = k * a;
    const double change = (f_new - f).cwiseAbs().maxCoeff();
    f = f_new;
    ++m.iterations;
    if (change < options.tolerance) break;
  }
  linearize();
  m.mode = f;
  m.gradient = grad;
  m.sqrt_w = sw;
  m.chol_b = llt.matrixL();
  double log_lik = 0.0;
  for (std::size_t i = 0; i < n; ++i) log_lik += log_sigmoid((labels[i] ? 1.0 : -1.0) * f[i]);
  m.log_marginal = -0.5 * a.dot(f) + log_lik - m.chol_b.diagonal().array().log().sum();
  return m;
}

}  // namespace

void Se3KernelParams::validate() const {
  if (!(signal_variance > 0.0 && translation_length > 0.0 && rotation_length > 0.0 && jitter > 0.0)) {
    throw InvalidInput("kernel parameters must be positive");
  }
}

double se3_kernel(const RigidPose& a, const RigidPose& b, const Se3KernelParams& params) {
  const double dt2 = (a.translation - b.translation).squaredNorm();
  const double dq = quaternion_chordal_distance(a.rotation, b.rotation);
  const double lt = params.translation_length, lr = params.rotation_length;
  return params.signal_variance * std::exp(-dt2 / (2.0 * lt * lt)) * std::exp(-dq * dq / (2.0 * lr * lr));
}

Eigen::MatrixXd se3_gram(const std::vector<RigidPose>& poses, const Se3KernelParams& params) {
  const auto n = static_cast<Eigen::Index>(poses.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = params.signal_variance + params.jitter;
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = se3_kernel(poses[i], poses[j], params);
  }
  return k;
}

GpModel gp_fit(const std::vector<RigidPose>& poses, const std::vector<int>& labels, const Se3KernelParams& params,
               const GpFitOptions& options) {
  params.validate();
  if (poses.size() != labels.size()) throw InvalidInput("gp_fit: poses and labels differ in length");
  if (poses.empty()) throw InvalidInput("gp_fit: no training data");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidInput("gp_fit: labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) {
    GpModel m;
    m.poses = poses;
    m.labels = labels;
    m.params = params;
    m.degenerate = true;
    m.degenerate_rate = (static_cast<double>(positives) + 1.0) / (static_cast<double>(labels.size()) + 2.0);
    return m;
  }
  if (!options.grid_search) return laplace(poses, labels, params, options);

  GpModel best;
  bool have = false;
  for (double ms : {0.5, 1.0, 2.0}) {
    for (double mt : {0.5, 1.0, 2.0}) {
      for (double mr : {0.5, 1.0, 2.0}) {
        Se3KernelParams p = params;
        p.signal_variance *= ms;
        p.translation_length *= mt;
        p.rotation_length *= mr;
        GpModel m = laplace(poses, labels, p, options);
        if (!have || m.log_marginal > best.log_marginal) {
          best = std::move(m);
          have = true;
        }
      }
    }
  }
  return best;
}

GpModel gp_fit(const std::vector<StrategySample>& samples, const Se3KernelParams& params,
               const GpFitOptions& options) {
  std::vector<RigidPose> poses;
  std::vector<int> labels;
  for (const auto& s : samples) {
    if (!s.weak_label) continue;
    poses.push_back(s.object_pose);
    labels.push_back(*s.weak_label ? 1 : 0);
  }
  return gp_fit(poses, labels, params, options);
}

GpPrediction gp_predict(const GpModel& model, const RigidPose& pose) {
  GpPrediction p;
  if (model.degenerate) {
    p.probability = model.degenerate_rate;
    return p;
  }
  const auto n = static_cast<Eigen::Index>(model.poses.size());
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks[i] = se3_kernel(model.poses[i], pose, model.params);
  p.mean = ks.dot(model.gradient);
  const Eigen::VectorXd v =
      model.chol_b.triangularView<Eigen::Lower>().solve(model.sqrt_w.cwiseProduct(ks));
  p.variance = std::max(0.0, se3_kernel(pose, pose, model.params) - v.squaredNorm());
  p.probability = sigmoid(p.mean / std::sqrt(1.0 + M_PI * p.variance / 8.0));
  return p;
}

double predict_prob(const GpModel& model, const RigidPose& pose) { return gp_predict(model, pose).probability; }

Ranking rank_and_select(const GpModel& model, const std::vector<StrategySample>& candidates) {
  if (candidates.empty()) throw InvalidInput("rank_and_select: no candidates");
  Ranking r;
  r.ranked = candidates;
  parallel_for(r.ranked.size(),
               [&](std::size_t i) { r.ranked[i].success_prob = predict_prob(model, r.ranked[i].object_pose); });
  std::sort(r.ranked.begin(), r.ranked.end(), [](const StrategySample& a, const StrategySample& b) {
    if (*a.success_prob != *b.success_prob) return *a.success_prob > *b.success_prob;
    return a.sample_id < b.sample_id;
  });
  for (const auto& s : r.ranked) {
    if (s.weak_label.value_or(false)) r.priority.push_back(s);
  }
  return r;
}

void write_gp_model(const std::filesystem::path& path, const GpModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "# twinforge gp model v1\n";
  out << "signal_variance " << model.params.signal_variance << "\n";
  out << "translation_length " << model.params.translation_length << "\n";
  out << "rotation_length " << model.params.rotation_length << "\n";
  out << "jitter " << model.params.jitter << "\n";
  out << "degenerate " << (model.degenerate ? 1 : 0) << "\n";
  out << "iterations " << model.iterations << "\n";
  out << "# qw qx qy qz tx ty tz label mode\n";
  for (std::size_t i = 0; i < model.poses.size(); ++i) {
    for (double x : model.poses[i].to_array()) out << x << ' ';
    out << model.labels[i] << ' ' << (model.degenerate ? 0.0 : model.mode[static_cast<Eigen::Index>(i)]) << "\n";
  }
}

}  // namespace twinforge
