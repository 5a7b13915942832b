#include "alstop/active_learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "alstop/errors.hpp"
#include "alstop/random.hpp"

namespace alstop {

std::string criterion_name(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::kProposed: return "proposed";
    case CriterionKind::kPacBayes: return "pac_bayes";
    case CriterionKind::kCrossValidation: return "cross_validation";
    case CriterionKind::kMaxVariance: return "max_variance";
    case CriterionKind::kGroundTruth: return "ground_truth";
  }
  throw ConfigError("unknown criterion kind");
}

CriterionKind criterion_from_name(const std::string& name) {
  if (name == "proposed") return CriterionKind::kProposed;
  if (name == "pac_bayes") return CriterionKind::kPacBayes;
  if (name == "cross_validation") return CriterionKind::kCrossValidation;
  if (name == "max_variance") return CriterionKind::kMaxVariance;
  if (name == "ground_truth") return CriterionKind::kGroundTruth;
  throw ConfigError("unknown criterion '" + name + "'");
}

void CriterionConfig::validate() const {
  switch (kind) {
    case CriterionKind::kProposed:
      if (!(alpha > 0.0 && alpha < 0.5))
        throw ConfigError("proposed: alpha must be in (0, 0.5)");
      if (min_sequence_length < 3)
        throw ConfigError("proposed: min_sequence_length must be >= 3");
      if (exact_cutoff < 3)
        throw ConfigError("proposed: exact_cutoff must be >= 3");
      break;
    case CriterionKind::kPacBayes:
      if (!(delta > 0.0) || delta > 1.0)
        throw ConfigError("pac_bayes: delta must be in (0, 1]");
      if (kappa < 0.0) throw ConfigError("pac_bayes: kappa must be >= 0");
      loss_range.validate();
      break;
    case CriterionKind::kCrossValidation:
      if (folds < 2) throw ConfigError("cross_validation: folds must be >= 2");
      break;
    case CriterionKind::kMaxVariance:
    case CriterionKind::kGroundTruth:
      break;
  }
}

int select_next(const GPPosterior& post, const LabeledDataset& pool,
                const std::vector<std::uint8_t>& labeled) {
  if (static_cast<int>(labeled.size()) != pool.size())
    throw ConfigError("select_next: labeled mask size mismatch");
  int best = -1;
  double best_var = 0.0;
  for (int i = 0; i < pool.size(); ++i) {
    if (labeled[i]) continue;
    const double var = post.predict_one(pool.input_row(i)).variance;
    if (best < 0 || var > best_var) {
      best = i;
      best_var = var;
    }
  }
  if (best < 0) throw ConfigError("select_next: pool exhausted");
  return best;
}

ProposedDecision evaluate_proposed(std::span<const double> r_values,
                                   const CriterionConfig& cfg) {
  ProposedDecision out;
  const auto e = binarize_by_median(r_values);
  const RunsMode mode =
      e.length() <= cfg.exact_cutoff ? RunsMode::kExact : RunsMode::kNormal;
  out.report = runs_test(e, cfg.alpha, mode, cfg.sided);
  if (static_cast<int>(r_values.size()) < cfg.min_sequence_length) return out;
  if (e.t0 == 0 || e.t1 == 0) return out;
  if (min_attainable_p_value(e.t0, e.t1, mode, cfg.sided) >= cfg.alpha)
    return out;  // the test cannot reject here; non-rejection is vacuous
  out.stop = !out.report.reject_randomness;
  return out;
}

bool stop_proposed(const BoundTrace& trace, const CriterionConfig& cfg) {
  if (cfg.kind != CriterionKind::kProposed)
    throw ConfigError("stop_proposed: wrong criterion kind");
  if (trace.r_values.empty()) return false;
  return evaluate_proposed(trace.r_values, cfg).stop;
}

double pac_bayes_bound(const GPPosterior& post, const LabeledDataset& train,
                       const CriterionConfig& cfg) {
  const double risk = empirical_expected_risk(post, train);
  const auto joint = post.predict_joint(train.inputs);
  Eigen::MatrixXd cov0 = joint.covariance;
  cov0.diagonal().array() += cfg.kappa;
  Eigen::MatrixXd cov1 =
      kernel_matrix(post.params(), train.inputs, train.inputs);
  cov1.diagonal().array() += cfg.kappa;
  const double kl =
      std::max(0.0, gaussian_kl(joint.mean, cov0,
                                Eigen::VectorXd::Zero(train.size()), cov1));
  return alquier_bound(risk, kl, train.size(), cfg.delta, cfg.loss_range);
}

bool stop_pac_bayes(const GPPosterior& post, const LabeledDataset& train,
                    const CriterionConfig& cfg) {
  if (cfg.kind != CriterionKind::kPacBayes)
    throw ConfigError("stop_pac_bayes: wrong criterion kind");
  return pac_bayes_bound(post, train, cfg) < cfg.threshold;
}

double cross_validation_risk(const LabeledDataset& train,
                             const KernelParams& params, int folds,
                             std::uint64_t seed) {
  const int n = train.size();
  if (folds < 2) throw ConfigError("cross_validation_risk: folds must be >= 2");
  if (n < folds)
    throw ConfigError("cross_validation_risk: " + std::to_string(n) +
                      " samples are too few for " + std::to_string(folds) +
                      " folds");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  double total = 0.0;
  int from = 0;
  for (int k = 0; k < folds; ++k) {
    const int count = n / folds + (k < n % folds ? 1 : 0);
    std::vector<int> held(order.begin() + from, order.begin() + from + count);
    std::vector<int> rest;
    rest.reserve(n - count);
    rest.insert(rest.end(), order.begin(), order.begin() + from);
    rest.insert(rest.end(), order.begin() + from + count, order.end());
    from += count;
    const auto model = fit_posterior(train.select(rest), params);
    total += empirical_expected_risk(model, train.select(held));
  }
  return total / folds;
}

bool stop_cross_validation(const LabeledDataset& train,
                           const KernelParams& params,
                           const CriterionConfig& cfg, std::uint64_t seed) {
  if (cfg.kind != CriterionKind::kCrossValidation)
    throw ConfigError("stop_cross_validation: wrong criterion kind");
  return cross_validation_risk(train, params, cfg.folds, seed) < cfg.threshold;
}

double max_pool_variance(const GPPosterior& post, const LabeledDataset& pool,
                         const std::vector<std::uint8_t>& labeled) {
  double max_var = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < pool.size(); ++i) {
    if (labeled[i]) continue;
    max_var = std::max(max_var, post.predict_one(pool.input_row(i)).variance);
  }
  if (std::isinf(max_var)) {
    // Exhausted pool: fall back to every pooled point.
    for (int i = 0; i < pool.size(); ++i)
      max_var = std::max(max_var, post.predict_one(pool.input_row(i)).variance);
  }
  return max_var;
}

bool stop_max_variance(const GPPosterior& post, const LabeledDataset& pool,
                       const std::vector<std::uint8_t>& labeled,
                       const CriterionConfig& cfg) {
  if (cfg.kind != CriterionKind::kMaxVariance)
    throw ConfigError("stop_max_variance: wrong criterion kind");
  return max_pool_variance(post, pool, labeled) < cfg.threshold;
}

double ground_truth_gain(double prior_risk, const GPPosterior& post,
                         const LabeledDataset& test) {
  return prior_risk - empirical_expected_risk(post, test);
}

bool stop_ground_truth(double prior_risk, const GPPosterior& post,
                       const LabeledDataset& test, const CriterionConfig& cfg) {
  if (cfg.kind != CriterionKind::kGroundTruth)
    throw ConfigError("stop_ground_truth: wrong criterion kind");
  return ground_truth_gain(prior_risk, post, test) > cfg.threshold;
}

void ALConfig::validate(int pool_size, bool has_test) const {
  params.validate();
  loss_range.validate();
  if (pool_size < 2) throw ConfigError("active learning needs a pool of >= 2");
  if (max_steps < 1 || max_steps > pool_size)
    throw ConfigError("max_steps must be in [1, pool size]");
  for (const auto& criterion : criteria) {
    criterion.validate();
    if (criterion.kind == CriterionKind::kGroundTruth && !has_test)
      throw ConfigError("ground_truth criterion requires a test dataset");
  }
  if (refit_hyperparameters && (h_grid.empty() || beta_grid.empty()))
    throw ConfigError("refit_hyperparameters requires non-empty grids");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

LabeledDataset labeled_subset(const LabeledDataset& pool,
                              const std::vector<int>& chosen) {
  return pool.select(chosen);
}

}  // namespace

ALTrace run_active_learning(const LabeledDataset& pool,
                            const LabeledDataset* test, const ALConfig& cfg) {
  cfg.validate(pool.size(), test != nullptr);

  ALTrace trace;
  trace.criteria.reserve(cfg.criteria.size());
  for (const auto& criterion : cfg.criteria)
    trace.criteria.push_back(CriterionOutcome{criterion, std::nullopt, {}, {}});

  Rng rng(cfg.seed);
  std::vector<std::uint8_t> labeled(pool.size(), 0);

  const int first =
      static_cast<int>(rng.below(static_cast<std::uint64_t>(pool.size())));
  labeled[first] = 1;
  trace.chosen_indices.push_back(first);

  KernelParams params = cfg.params;
  GPPosterior post =
      fit_posterior(labeled_subset(pool, trace.chosen_indices), params);

  double prior_risk = 0.0;
  if (test != nullptr)
    prior_risk = empirical_expected_risk(GPPosterior::prior(params), *test);

  const auto evaluate_criteria = [&](int n) -> bool {
    if (test != nullptr)
      trace.test_risk.push_back(empirical_expected_risk(post, *test));
    bool truncate = false;
    for (auto& outcome : trace.criteria) {
      const auto& criterion = outcome.config;
      bool fires = false;
      double statistic = kNaN;
      switch (criterion.kind) {
        case CriterionKind::kProposed: {
          if (!trace.bound_trace.r_values.empty()) {
            const auto decision =
                evaluate_proposed(trace.bound_trace.r_values, criterion);
            statistic = decision.report.p_value;
            fires = decision.stop;
          }
          break;
        }
        case CriterionKind::kPacBayes: {
          statistic = pac_bayes_bound(
              post, labeled_subset(pool, trace.chosen_indices), criterion);
          fires = statistic < criterion.threshold;
          break;
        }
        case CriterionKind::kCrossValidation: {
          if (n >= criterion.folds) {
            statistic = cross_validation_risk(
                labeled_subset(pool, trace.chosen_indices), params,
                criterion.folds,
                derive_seed(cfg.seed, 0x63766f6c64ULL, n));  // per-size folds
            fires = statistic < criterion.threshold;
          }
          break;
        }
        case CriterionKind::kMaxVariance: {
          statistic = max_pool_variance(post, pool, labeled);
          fires = statistic < criterion.threshold;
          break;
        }
        case CriterionKind::kGroundTruth: {
          statistic = prior_risk - trace.test_risk.back();
          fires = statistic > criterion.threshold;
          break;
        }
      }
      outcome.fired.push_back(fires ? 1 : 0);
      outcome.statistic.push_back(statistic);
      if (fires && !outcome.stop_step) {
        outcome.stop_step = n;
        if (criterion.kind == CriterionKind::kProposed &&
            !trace.bound_trace.stop_step)
          trace.bound_trace.stop_step = n;
      }
      if (cfg.truncate_on && criterion.kind == *cfg.truncate_on && fires)
        truncate = true;
    }
    return truncate;
  };

  int n = 1;
  bool truncate = evaluate_criteria(n);

  while (!truncate && n < cfg.max_steps &&
         n < pool.size()) {
    const int next = select_next(post, pool, labeled);
    const Eigen::VectorXd x_new = pool.input_row(next);
    const double y_new = pool.targets(next);

    const auto bound = gap_upper_bound(post, x_new, y_new, cfg.loss_range);
    trace.bound_trace.r_values.push_back(bound.r);
    trace.bound_trace.kl_values.push_back(bound.kl);

    labeled[next] = 1;
    trace.chosen_indices.push_back(next);
    ++n;

    if (cfg.refit_hyperparameters) {
      params = optimize_hyperparameters(
          labeled_subset(pool, trace.chosen_indices), cfg.h_grid,
          cfg.beta_grid);
      post = fit_posterior(labeled_subset(pool, trace.chosen_indices), params);
      if (test != nullptr)
        prior_risk =
            empirical_expected_risk(GPPosterior::prior(params), *test);
    } else {
      post = update_posterior(post, x_new, y_new);
    }

    // Record the decision the proposed rule would take on the sequence so
    // far, whether or not that criterion is configured.
    CriterionConfig probe;
    probe.alpha = 0.1;  // report only; stop decisions use the configured cfg
    for (const auto& criterion : cfg.criteria)
      if (criterion.kind == CriterionKind::kProposed) probe = criterion;
    trace.bound_trace.decisions.push_back(
        evaluate_proposed(trace.bound_trace.r_values, probe).report);

    truncate = evaluate_criteria(n);
  }

  return trace;
}

}  // namespace alstop
