#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alstop/active_learning.hpp"
#include "alstop/dataset.hpp"
#include "alstop/gp.hpp"

namespace alstop {

struct GridSpec {
  double min_value = 1e-2;
  double max_value = 1e2;
  int count = 25;
  bool log_spaced = true;

  std::vector<double> values() const;
};

struct DatasetSpec {
  enum class Source { kArtificial, kSignWave, kCsv };
  Source source = Source::kArtificial;
  int n = 1000;         // per-replication sample count (generators)
  int master_n = 2000;  // master sample count used for calibration
  double noise_precision = 400.0;
  std::pair<double, double> x_range{-5.0, 15.0};
  std::string path;  // csv
  TargetColumn target_column = std::string("y");
};

struct EtaCalibration {
  int train_size = 50;
  int repeats = 20;
};

struct ThresholdCalibration {
  int replications = 20;
  int grid_count = 200;
};

struct GroundTruthBootstrap {
  int repeats = 20;
  int max_fit_size = 2000;  // cap on the bootstrap GP training size
};

/// How a criterion's threshold is obtained.
enum class ThresholdPolicy { kNone, kFixed, kCalibrate, kBootstrap };

struct CriterionSpec {
  CriterionConfig config;
  ThresholdPolicy policy = ThresholdPolicy::kNone;
  std::pair<double, double> calibration_range{0.0, 1.0};

  /// Calibration ranges matching the reference protocol:
  /// pac_bayes [0.01, 100], cross_validation [0.001, 10],
  /// max_variance [0.0001, 1].
  static std::pair<double, double> default_range(CriterionKind kind);
};

struct ExperimentConfig {
  DatasetSpec dataset;
  /// Optional separate reference dataset used for threshold calibration;
  /// defaults to the experiment dataset.
  std::optional<DatasetSpec> reference;
  int pool_size = 50;
  int replications = 20;
  int max_steps = 50;
  std::uint64_t seed = 1;

  double alpha = 0.001;
  double delta = 0.01;
  double kappa = 0.01;
  int min_sequence_length = 10;
  RunsSided sided = RunsSided::kTwo;
  int exact_cutoff = 30;

  GridSpec h_grid;
  GridSpec beta_grid;
  std::optional<KernelParams> fixed_params;
  int hyperparameter_fit_size = 0;  // 0 -> pool_size

  std::optional<double> eta;  // empty -> calibrate
  EtaCalibration eta_calibration;
  ThresholdCalibration threshold_calibration;
  GroundTruthBootstrap ground_truth_bootstrap;

  std::vector<CriterionSpec> criteria;
  std::optional<LossRange> fixed_loss_range;  // empty -> a=0, b=maxY-minY per
                                              // replication dataset
  std::string output_dir;  // empty -> no files written

  void validate() const;
};

/// Parse/serialize the JSON mirror of ExperimentConfig.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct OptimalStop {
  int t_opt = 0;
  bool unreached = false;  // set when no step reaches eta; t_opt = steps + 1
};

/// Smallest data size whose recorded test risk is <= eta.
OptimalStop find_optimal_stop(std::span<const double> per_step_test_risk,
                              double eta);

/// e_stop = |stop_step - t_opt|.
int stopping_error(int stop_step, int t_opt);

/// Risk threshold for the optimal stopping time: mean + 2 sd of held-out
/// risks over `repeats` random train/test resamples of the dataset.
double calibrate_eta(const LabeledDataset& dataset, int train_size,
                     int repeats, const KernelParams& params,
                     std::uint64_t seed);

struct EtaCalibrationDetail {
  double eta = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // population sd, so a single repeat gives 0
  std::vector<double> risks;
};

EtaCalibrationDetail calibrate_eta_detailed(const LabeledDataset& dataset,
                                            int train_size, int repeats,
                                            const KernelParams& params,
                                            std::uint64_t seed);

/// The deterministic preamble shared by run_experiment and the calibration
/// subcommands: the standardized master dataset, the common kernel
/// parameters, and eta (calibrated unless fixed in the config).
struct ExperimentSetup {
  LabeledDataset master;
  KernelParams params;
  double eta = 0.0;
};

ExperimentSetup make_experiment_setup(const ExperimentConfig& cfg);

/// Common kernel parameters for a whole experiment: the fixed ones when
/// given, otherwise a marginal-likelihood grid fit on a training-sized
/// random subsample of the master dataset.
KernelParams resolve_common_params(const ExperimentConfig& cfg,
                                   const LabeledDataset& master);

/// Everything needed to reproduce calibration traces.
struct CalibrationContext {
  DatasetSpec dataset;
  KernelParams params;
  double eta = 0.0;
  int pool_size = 50;
  int max_steps = 50;
  double alpha = 0.001;
  double delta = 0.01;
  double kappa = 0.01;
  int min_sequence_length = 10;
  RunsSided sided = RunsSided::kTwo;
  int exact_cutoff = 30;
  std::optional<LossRange> fixed_loss_range;
};

CalibrationContext make_calibration_context(const ExperimentConfig& cfg,
                                            const DatasetSpec& dataset,
                                            const KernelParams& params,
                                            double eta);

/// Scan equally spaced thresholds against one shared set of recorded
/// traces and return the minimizer of the mean stopping error (ties go to
/// the smaller threshold). Errors for the proposed criterion, which has no
/// threshold.
double calibrate_threshold(const CalibrationContext& ctx, CriterionKind kind,
                           std::pair<double, double> range, int grid_count,
                           int replications, std::uint64_t seed);

/// Ground-truth threshold: mean - 2 sd of the full-data improvement
/// prior_risk - risk(q | bootstrap resample) over bootstrap resamples.
double bootstrap_ground_truth_threshold(const LabeledDataset& master,
                                        const KernelParams& params,
                                        const GroundTruthBootstrap& cfg,
                                        std::uint64_t seed);

struct CriterionResult {
  std::string name;
  std::optional<int> stop_step;
  int scored_stop = 0;  // stop_step, or steps+1 when the criterion never fired
  double e_stop = 0.0;
};

struct ReplicationRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  int t_opt = 0;
  bool t_opt_unreached = false;
  std::vector<CriterionResult> criteria;
};

struct CriterionAggregate {
  std::string name;
  double mean_e_stop = 0.0;
  double stderr_e_stop = 0.0;
  double mean_stop = 0.0;
  int unfired = 0;
  std::optional<double> threshold;
};

struct ReplicationError {
  int rep = 0;
  std::string message;
};

struct ExperimentReport {
  double eta = 0.0;
  KernelParams params;
  std::vector<ReplicationRecord> records;
  std::vector<ReplicationError> errors;
  std::vector<CriterionAggregate> aggregates;
  std::vector<double> mean_risk_curve;  // averaged over replications
  std::vector<ALTrace> traces;          // one per successful replication
};

/// Replicated experiment: fresh pool/test data per replication, one trace
/// with every configured criterion scored passively, t_opt and e_stop per
/// criterion, aggregated mean and standard error. Writes report.json,
/// summary.csv and trace_<rep>.csv when output_dir is set.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

std::string experiment_report_to_json(const ExperimentReport& report,
                                      const ExperimentConfig& cfg);
void write_experiment_outputs(const ExperimentReport& report,
                              const ExperimentConfig& cfg,
                              const std::string& dir);

/// Build the master (calibration) dataset for a source, standardized.
LabeledDataset make_master_dataset(const DatasetSpec& spec,
                                   std::uint64_t seed);

}  // namespace alstop
