#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alstop/bounds.hpp"
#include "alstop/dataset.hpp"
#include "alstop/gp.hpp"
#include "alstop/runs_test.hpp"

namespace alstop {

enum class CriterionKind {
  kProposed,
  kPacBayes,
  kCrossValidation,
  kMaxVariance,
  kGroundTruth,
};

std::string criterion_name(CriterionKind kind);
CriterionKind criterion_from_name(const std::string& name);

struct CriterionConfig {
  CriterionKind kind = CriterionKind::kProposed;

  // proposed
  double alpha = 0.001;
  int min_sequence_length = 10;
  RunsSided sided = RunsSided::kTwo;
  int exact_cutoff = 30;  // exact null distribution up to this length

  // threshold criteria
  double threshold = 0.0;

  // pac_bayes
  double delta = 0.01;
  double kappa = 0.01;
  LossRange loss_range{0.0, 1.0};

  // cross_validation
  int folds = 5;

  void validate() const;
};

/// Growing record of the one-step upper bounds r_t = kl_t + C and the
/// runs-test decision taken after each append.
struct BoundTrace {
  std::vector<double> r_values;
  std::vector<double> kl_values;
  std::vector<RunsTestReport> decisions;
  std::optional<int> stop_step;  // data size at which the proposed criterion
                                 // first fired
};

/// Index of the unlabeled pool point with maximal predictive variance;
/// ties go to the lowest index.
int select_next(const GPPosterior& post, const LabeledDataset& pool,
                const std::vector<std::uint8_t>& labeled);

struct ProposedDecision {
  RunsTestReport report;
  bool stop = false;
};

/// Binarize the full bound sequence by its median and run the runs test.
/// Stops only when the sequence is long enough, both symbols occur, the
/// test is decisive at level alpha for the realized symbol counts (its
/// smallest attainable p-value is below alpha), and randomness is not
/// rejected.
ProposedDecision evaluate_proposed(std::span<const double> r_values,
                                   const CriterionConfig& cfg);

bool stop_proposed(const BoundTrace& trace, const CriterionConfig& cfg);

/// PAC-Bayes upper bound a_t on the expected generalization error of the
/// posterior: empirical risk on the labeled data plus the KL to the prior
/// over the training inputs (both covariances stabilized with kappa I),
/// minus log(delta)/t, plus (b-a)^2/2.
double pac_bayes_bound(const GPPosterior& post, const LabeledDataset& train,
                       const CriterionConfig& cfg);

bool stop_pac_bayes(const GPPosterior& post, const LabeledDataset& train,
                    const CriterionConfig& cfg);

/// Mean held-out expected risk over a deterministic fold partition.
double cross_validation_risk(const LabeledDataset& train,
                             const KernelParams& params, int folds,
                             std::uint64_t seed);

bool stop_cross_validation(const LabeledDataset& train,
                           const KernelParams& params,
                           const CriterionConfig& cfg, std::uint64_t seed);

/// Largest predictive variance over the unlabeled pool, or over the whole
/// pool once every point is labeled.
double max_pool_variance(const GPPosterior& post, const LabeledDataset& pool,
                         const std::vector<std::uint8_t>& labeled);

bool stop_max_variance(const GPPosterior& post, const LabeledDataset& pool,
                       const std::vector<std::uint8_t>& labeled,
                       const CriterionConfig& cfg);

/// Cumulative improvement over the prior measured on held-out data:
/// prior_risk - risk(post); stops when it exceeds the threshold.
double ground_truth_gain(double prior_risk, const GPPosterior& post,
                         const LabeledDataset& test);

bool stop_ground_truth(double prior_risk, const GPPosterior& post,
                       const LabeledDataset& test, const CriterionConfig& cfg);

struct ALConfig {
  KernelParams params;
  std::vector<CriterionConfig> criteria;
  LossRange loss_range{0.0, 1.0};
  int max_steps = 50;  // cap on the labeled data size
  std::uint64_t seed = 1;
  /// When set, the loop breaks as soon as this criterion fires; otherwise
  /// every criterion is scored passively and the loop runs to exhaustion.
  std::optional<CriterionKind> truncate_on;
  /// Re-fit (h, beta) by grid search on the labeled data at every step.
  /// Off by default: the bound assumes both posteriors share one prior.
  bool refit_hyperparameters = false;
  std::vector<double> h_grid;
  std::vector<double> beta_grid;

  void validate(int pool_size, bool has_test) const;
};

struct CriterionOutcome {
  CriterionConfig config;
  std::optional<int> stop_step;        // first data size at which it fired
  std::vector<std::uint8_t> fired;     // fired[i]: held at data size i+1
  std::vector<double> statistic;       // value compared against the
                                       // threshold (NaN when undefined)
};

struct ALTrace {
  std::vector<int> chosen_indices;   // labeling order within the pool
  std::vector<double> test_risk;     // test_risk[i]: risk at data size i+1
  BoundTrace bound_trace;
  std::vector<CriterionOutcome> criteria;

  int steps() const { return static_cast<int>(chosen_indices.size()); }
};

/// One full acquisition run: seed with a uniformly random pool point, then
/// repeatedly label the maximum-variance point, extend the posterior,
/// append r_t, and evaluate every criterion on the new state.
ALTrace run_active_learning(const LabeledDataset& pool,
                            const LabeledDataset* test, const ALConfig& cfg);

}  // namespace alstop
