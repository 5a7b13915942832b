#pragma once

#include <Eigen/Core>

#include "alstop/dataset.hpp"
#include "alstop/gp.hpp"

namespace alstop {

/// Loss range [a, b] with 0 <= a <= b; a == b is the degenerate interval
/// whose Jensen-gap constant is 0.
struct LossRange {
  double a = 0.0;
  double b = 1.0;

  void validate() const;

  /// Calibration rule a = 0, b = max(targets) - min(targets).
  static LossRange from_targets(const Eigen::VectorXd& targets);
};

/// C = 2 log((e^a + e^b)/2) - a - b, evaluated overflow-safely.
double jensen_gap_constant(const LossRange& range);

/// Closed-form KL divergence between one-step GP posteriors, as a function
/// of the pre-update predictive variance sigma and residual y - mu at the
/// new point:
///   (1/2) beta sigma - (1/2) log(1 + beta sigma)
///   + (1/2) (beta sigma / (sigma + 1/beta)) residual^2.
double sequential_kl_value(double sigma, double residual, double beta);

/// sequential_kl_value evaluated at the posterior's prediction for the new
/// point, with beta taken from the posterior's kernel parameters.
double sequential_kl(const GPPosterior& post, const Eigen::VectorXd& x_new,
                     double y_new);

/// KL(N(mean0, cov0) || N(mean1, cov1)) for finite-dimensional Gaussians.
double gaussian_kl(const Eigen::VectorXd& mean0, const Eigen::MatrixXd& cov0,
                   const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1);

/// One-step upper bound on the drop in expected generalization error:
/// r = kl + c with kl the sequential KL and c the Jensen-gap constant.
struct GapBound {
  double kl;
  double c;
  double r;
};

GapBound gap_upper_bound(const GPPosterior& post, const Eigen::VectorXd& x_new,
                         double y_new, const LossRange& range);

/// PAC-Bayes regression bound:
/// empirical_risk + (kl_to_prior - log delta)/t + (b - a)^2 / 2.
double alquier_bound(double empirical_risk, double kl_to_prior, int t,
                     double delta, const LossRange& range);

/// Core of the expected-risk estimate:
/// (beta / (2 n)) (sse + var_trace) + (1/2) log(beta / (2 pi)).
double expected_risk_terms(double sse, double var_trace, int n, double beta);

/// Posterior average of the expected loss over the dataset, using the
/// predictive residuals and the trace of the predictive covariance.
double empirical_expected_risk(const GPPosterior& post,
                               const LabeledDataset& data);

}  // namespace alstop
