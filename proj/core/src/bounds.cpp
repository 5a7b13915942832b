#include "alstop/bounds.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "alstop/errors.hpp"

namespace alstop {

void LossRange::validate() const {
  if (!(a >= 0.0) || !(b >= a) || !std::isfinite(b))
    throw ConfigError("loss range requires 0 <= a <= b < inf");
}

LossRange LossRange::from_targets(const Eigen::VectorXd& targets) {
  if (targets.size() == 0)
    throw ConfigError("loss range calibration needs at least one target");
  return {0.0, targets.maxCoeff() - targets.minCoeff()};
}

double jensen_gap_constant(const LossRange& range) {
  range.validate();
  // 2 log((e^a + e^b)/2) - a - b with max(a, b) factored out.
  return (range.b - range.a) +
         2.0 * (std::log1p(std::exp(range.a - range.b)) - std::log(2.0));
}

double sequential_kl_value(double sigma, double residual, double beta) {
  sigma = std::max(0.0, sigma);
  const double bs = beta * sigma;
  const double quad = 0.5 * residual * residual * beta * bs / (1.0 + bs);
  return std::max(0.0, 0.5 * bs - 0.5 * std::log1p(bs)) + quad;
}

double sequential_kl(const GPPosterior& post, const Eigen::VectorXd& x_new,
                     double y_new) {
  const auto pred = post.predict_one(x_new);
  return sequential_kl_value(pred.variance, y_new - pred.mean,
                             post.params().noise_precision);
}

namespace {

struct CholJitter {
  Eigen::LLT<Eigen::MatrixXd> llt;
};

CholJitter kl_chol(const Eigen::MatrixXd& A, const char* which) {
  CholJitter out;
  out.llt.compute(A);
  if (out.llt.info() == Eigen::Success) return out;
  const double scale = std::max(A.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-12); rel *= 10.0) {
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += rel * scale;
    out.llt.compute(Aj);
    if (out.llt.info() == Eigen::Success) return out;
  }
  throw NumericError(std::string("gaussian_kl: ") + which +
                     " covariance is singular after jitter escalation");
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 *
         Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

}  // namespace

double gaussian_kl(const Eigen::VectorXd& mean0, const Eigen::MatrixXd& cov0,
                   const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1) {
  const auto n = mean0.size();
  if (mean1.size() != n || cov0.rows() != n || cov0.cols() != n ||
      cov1.rows() != n || cov1.cols() != n)
    throw ConfigError("gaussian_kl: dimension mismatch");
  const auto c1 = kl_chol(cov1, "second");
  const auto c0 = kl_chol(cov0, "first");
  const double trace = c1.llt.solve(cov0).trace();
  const Eigen::VectorXd d = mean1 - mean0;
  const double quad = d.dot(c1.llt.solve(d));
  return 0.5 * (trace + quad - static_cast<double>(n) + log_det(c1.llt) -
                log_det(c0.llt));
}

GapBound gap_upper_bound(const GPPosterior& post, const Eigen::VectorXd& x_new,
                         double y_new, const LossRange& range) {
  GapBound out;
  out.kl = sequential_kl(post, x_new, y_new);
  out.c = jensen_gap_constant(range);
  out.r = out.kl + out.c;
  return out;
}

double alquier_bound(double empirical_risk, double kl_to_prior, int t,
                     double delta, const LossRange& range) {
  range.validate();
  if (t < 1) throw ConfigError("alquier_bound: t must be >= 1");
  if (!(delta > 0.0) || delta > 1.0)
    throw ConfigError("alquier_bound: delta must be in (0, 1]");
  if (kl_to_prior < 0.0)
    throw ConfigError("alquier_bound: KL must be >= 0");
  const double width = range.b - range.a;
  return empirical_risk + (kl_to_prior - std::log(delta)) / t +
         0.5 * width * width;
}

double expected_risk_terms(double sse, double var_trace, int n, double beta) {
  return beta / (2.0 * n) * (sse + var_trace) +
         0.5 * std::log(beta / (2.0 * std::numbers::pi));
}

double empirical_expected_risk(const GPPosterior& post,
                               const LabeledDataset& data) {
  if (data.size() < 1)
    throw ConfigError("empirical_expected_risk: empty dataset");
  const auto pred = post.predict(data.inputs);
  const double sse = (data.targets - pred.mean).squaredNorm();
  // Trace of the joint predictive covariance = sum of pointwise variances.
  const double var_trace = pred.variance.sum();
  return expected_risk_terms(sse, var_trace, data.size(),
                             post.params().noise_precision);
}

}  // namespace alstop
