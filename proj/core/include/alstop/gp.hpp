#pragma once

#include <Eigen/Core>
#include <span>

#include "alstop/dataset.hpp"

namespace alstop {

/// Gaussian kernel hyperparameters: k(x,x') = exp(-||x-x'||^2 / (2 h^2)),
/// observation noise variance 1/beta.
struct KernelParams {
  double length_scale = 1.0;     // h
  double noise_precision = 1.0;  // beta

  void validate() const;
};

double kernel_value(const KernelParams& params, const Eigen::VectorXd& a,
                    const Eigen::VectorXd& b);

/// Cross-kernel matrix K(X, Y), X rows x Y rows.
Eigen::MatrixXd kernel_matrix(const KernelParams& params,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y);

/// Exact GP regression posterior with zero prior mean. Holds the lower
/// Cholesky factor of K + (1/beta) I (plus any stabilizing jitter) and the
/// solved weights alpha = (K + (1/beta) I)^{-1} y. Immutable; updates
/// return a new value.
class GPPosterior {
 public:
  /// Posterior with zero training points, i.e. the prior.
  static GPPosterior prior(const KernelParams& params);

  int size() const { return static_cast<int>(train_inputs_.rows()); }
  const KernelParams& params() const { return params_; }
  const Eigen::MatrixXd& train_inputs() const { return train_inputs_; }
  const Eigen::VectorXd& train_targets() const { return train_targets_; }
  const Eigen::MatrixXd& gram_factor() const { return gram_factor_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double jitter() const { return jitter_; }

  struct PointPrediction {
    double mean;
    double variance;  // clamped at >= 0
  };
  PointPrediction predict_one(const Eigen::VectorXd& x) const;

  struct Prediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
  };
  /// Pointwise predictive means and (clamped) variances, one query per row.
  Prediction predict(const Eigen::MatrixXd& queries) const;

  struct JointPrediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // symmetrized, diagonal clamped at >= 0
  };
  /// Full predictive covariance over the query rows.
  JointPrediction predict_joint(const Eigen::MatrixXd& queries) const;

 private:
  friend GPPosterior fit_posterior(const LabeledDataset&, const KernelParams&);
  friend GPPosterior update_posterior(const GPPosterior&,
                                      const Eigen::VectorXd&, double);

  KernelParams params_;
  Eigen::MatrixXd train_inputs_;
  Eigen::VectorXd train_targets_;
  Eigen::MatrixXd gram_factor_;  // lower triangular
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;  // absolute diagonal addition used by the factorization
};

/// Factorize K + (1/beta) I over the training rows and solve for alpha.
/// Escalates diagonal jitter from 1e-10 to 1e-4 (relative to the largest
/// diagonal entry) before failing with NumericError.
GPPosterior fit_posterior(const LabeledDataset& train,
                          const KernelParams& params);

/// Rank-1 extension of the Cholesky factor with the new point; numerically
/// identical to refitting on the augmented set. Falls back to a full refit
/// if the extension breaks down.
GPPosterior update_posterior(const GPPosterior& post,
                             const Eigen::VectorXd& x_new, double y_new);

/// log N(y | 0, K + (1/beta) I).
double log_marginal_likelihood(const LabeledDataset& train,
                               const KernelParams& params);

/// Grid argmax of the log marginal likelihood; ties prefer the smaller
/// length scale, then the smaller noise precision.
KernelParams optimize_hyperparameters(const LabeledDataset& train,
                                      std::span<const double> h_grid,
                                      std::span<const double> beta_grid);

/// Log-spaced default grid over [1e-2, 1e2].
std::vector<double> default_hyperparameter_grid(int count = 25);

}  // namespace alstop
