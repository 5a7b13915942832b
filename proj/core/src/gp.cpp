#include "alstop/gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "alstop/errors.hpp"

namespace alstop {

void KernelParams::validate() const {
  if (!(length_scale > 0.0))
    throw ConfigError("kernel length scale must be > 0");
  if (!(noise_precision > 0.0))
    throw ConfigError("kernel noise precision must be > 0");
}

double kernel_value(const KernelParams& params, const Eigen::VectorXd& a,
                    const Eigen::VectorXd& b) {
  const double sq = (a - b).squaredNorm();
  return std::exp(-sq / (2.0 * params.length_scale * params.length_scale));
}

Eigen::MatrixXd kernel_matrix(const KernelParams& params,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y) {
  const Eigen::VectorXd xs = X.rowwise().squaredNorm();
  const Eigen::VectorXd ys = Y.rowwise().squaredNorm();
  Eigen::MatrixXd sq = -2.0 * X * Y.transpose();
  sq.colwise() += xs;
  sq.rowwise() += ys.transpose();
  const double inv = -1.0 / (2.0 * params.length_scale * params.length_scale);
  return (sq.array().max(0.0) * inv).exp();
}

namespace {

struct CholJitter {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// LLT with diagonal jitter escalating from rel_start to rel_max of the
// largest diagonal entry.
CholJitter chol_with_jitter(const Eigen::MatrixXd& A, double rel_start = 1e-10,
                            double rel_max = 1e-4) {
  CholJitter out;
  const double scale = std::max(A.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  out.llt.compute(A);
  if (out.llt.info() == Eigen::Success) return out;
  for (double rel = rel_start; rel <= rel_max * (1.0 + 1e-12); rel *= 10.0) {
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += rel * scale;
    out.llt.compute(Aj);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = rel * scale;
      return out;
    }
  }
  throw NumericError("Cholesky factorization failed after jitter escalation");
}

}  // namespace

GPPosterior GPPosterior::prior(const KernelParams& params) {
  params.validate();
  GPPosterior post;
  post.params_ = params;
  return post;
}

GPPosterior::PointPrediction GPPosterior::predict_one(
    const Eigen::VectorXd& x) const {
  const double kxx = 1.0;  // Gaussian kernel on the diagonal
  if (size() == 0) return {0.0, kxx};
  Eigen::VectorXd ks(size());
  for (int i = 0; i < size(); ++i)
    ks(i) = kernel_value(params_, train_inputs_.row(i), x);
  const double mean = ks.dot(alpha_);
  const Eigen::VectorXd v =
      gram_factor_.triangularView<Eigen::Lower>().solve(ks);
  return {mean, std::max(0.0, kxx - v.squaredNorm())};
}

GPPosterior::Prediction GPPosterior::predict(
    const Eigen::MatrixXd& queries) const {
  const int q = static_cast<int>(queries.rows());
  if (q == 0) throw ConfigError("predict: query set is empty");
  Prediction out;
  if (size() == 0) {
    out.mean = Eigen::VectorXd::Zero(q);
    out.variance = Eigen::VectorXd::Ones(q);
    return out;
  }
  const Eigen::MatrixXd Ks = kernel_matrix(params_, train_inputs_, queries);
  out.mean = Ks.transpose() * alpha_;
  const Eigen::MatrixXd V = gram_factor_.triangularView<Eigen::Lower>().solve(Ks);
  out.variance =
      (1.0 - V.colwise().squaredNorm().array()).max(0.0).transpose();
  return out;
}

GPPosterior::JointPrediction GPPosterior::predict_joint(
    const Eigen::MatrixXd& queries) const {
  const int q = static_cast<int>(queries.rows());
  if (q == 0) throw ConfigError("predict_joint: query set is empty");
  JointPrediction out;
  const Eigen::MatrixXd Kqq = kernel_matrix(params_, queries, queries);
  if (size() == 0) {
    out.mean = Eigen::VectorXd::Zero(q);
    out.covariance = Kqq;
    return out;
  }
  const Eigen::MatrixXd Ks = kernel_matrix(params_, train_inputs_, queries);
  out.mean = Ks.transpose() * alpha_;
  const Eigen::MatrixXd V = gram_factor_.triangularView<Eigen::Lower>().solve(Ks);
  Eigen::MatrixXd cov = Kqq - V.transpose() * V;
  cov = 0.5 * (cov + cov.transpose()).eval();
  for (int i = 0; i < q; ++i) cov(i, i) = std::max(0.0, cov(i, i));
  out.covariance = std::move(cov);
  return out;
}

GPPosterior fit_posterior(const LabeledDataset& train,
                          const KernelParams& params) {
  params.validate();
  if (train.size() < 1) throw ConfigError("fit_posterior: empty training set");
  GPPosterior post;
  post.params_ = params;
  post.train_inputs_ = train.inputs;
  post.train_targets_ = train.targets;
  Eigen::MatrixXd A = kernel_matrix(params, train.inputs, train.inputs);
  A.diagonal().array() += 1.0 / params.noise_precision;
  const auto chol = chol_with_jitter(A);
  post.gram_factor_ = chol.llt.matrixL();
  post.alpha_ = chol.llt.solve(train.targets);
  post.jitter_ = chol.jitter;
  return post;
}

GPPosterior update_posterior(const GPPosterior& post,
                             const Eigen::VectorXd& x_new, double y_new) {
  const int t = post.size();
  if (t == 0) {
    LabeledDataset one;
    one.inputs.resize(1, x_new.size());
    one.inputs.row(0) = x_new;
    one.targets.resize(1);
    one.targets(0) = y_new;
    return fit_posterior(one, post.params());
  }

  Eigen::VectorXd ks(t);
  for (int i = 0; i < t; ++i)
    ks(i) = kernel_value(post.params(), post.train_inputs().row(i), x_new);
  const Eigen::VectorXd l =
      post.gram_factor().triangularView<Eigen::Lower>().solve(ks);
  const double diag =
      1.0 + 1.0 / post.params().noise_precision + post.jitter();
  const double d2 = diag - l.squaredNorm();

  LabeledDataset augmented;
  augmented.inputs.resize(t + 1, post.train_inputs().cols());
  augmented.inputs.topRows(t) = post.train_inputs();
  augmented.inputs.row(t) = x_new;
  augmented.targets.resize(t + 1);
  augmented.targets.head(t) = post.train_targets();
  augmented.targets(t) = y_new;

  if (!(d2 > 1e-12 * diag)) {
    // Extension lost positive definiteness; refit with jitter escalation.
    return fit_posterior(augmented, post.params());
  }

  GPPosterior next;
  next.params_ = post.params();
  next.train_inputs_ = std::move(augmented.inputs);
  next.train_targets_ = std::move(augmented.targets);
  next.jitter_ = post.jitter();
  next.gram_factor_ = Eigen::MatrixXd::Zero(t + 1, t + 1);
  next.gram_factor_.topLeftCorner(t, t) = post.gram_factor();
  next.gram_factor_.row(t).head(t) = l.transpose();
  next.gram_factor_(t, t) = std::sqrt(d2);
  const Eigen::VectorXd z =
      next.gram_factor_.triangularView<Eigen::Lower>().solve(
          next.train_targets_);
  next.alpha_ = next.gram_factor_.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(z);
  return next;
}

double log_marginal_likelihood(const LabeledDataset& train,
                               const KernelParams& params) {
  params.validate();
  const int t = train.size();
  if (t < 1)
    throw ConfigError("log_marginal_likelihood: empty training set");
  Eigen::MatrixXd A = kernel_matrix(params, train.inputs, train.inputs);
  A.diagonal().array() += 1.0 / params.noise_precision;
  const auto chol = chol_with_jitter(A);
  const Eigen::VectorXd alpha = chol.llt.solve(train.targets);
  const double log_det =
      Eigen::MatrixXd(chol.llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * train.targets.dot(alpha) - log_det -
         0.5 * t * std::log(2.0 * std::numbers::pi);
}

KernelParams optimize_hyperparameters(const LabeledDataset& train,
                                      std::span<const double> h_grid,
                                      std::span<const double> beta_grid) {
  if (h_grid.empty() || beta_grid.empty())
    throw ConfigError("optimize_hyperparameters: empty grid");
  std::vector<double> hs(h_grid.begin(), h_grid.end());
  std::vector<double> betas(beta_grid.begin(), beta_grid.end());
  std::sort(hs.begin(), hs.end());
  std::sort(betas.begin(), betas.end());

  bool found = false;
  double best_lml = 0.0;
  KernelParams best;
  for (const double h : hs) {
    for (const double beta : betas) {
      const KernelParams candidate{h, beta};
      candidate.validate();
      double lml;
      try {
        lml = log_marginal_likelihood(train, candidate);
      } catch (const NumericError&) {
        continue;
      }
      if (!std::isfinite(lml)) continue;
      if (!found || lml > best_lml) {
        found = true;
        best_lml = lml;
        best = candidate;
      }
    }
  }
  if (!found)
    throw NumericError(
        "optimize_hyperparameters: every grid point failed to factorize");
  return best;
}

std::vector<double> default_hyperparameter_grid(int count) {
  if (count < 2) throw ConfigError("grid count must be >= 2");
  std::vector<double> grid(count);
  const double lo = std::log(1e-2), hi = std::log(1e2);
  for (int i = 0; i < count; ++i)
    grid[i] = std::exp(lo + (hi - lo) * i / (count - 1));
  return grid;
}

}  // namespace alstop
