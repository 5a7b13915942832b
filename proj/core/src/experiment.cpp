#include "alstop/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "alstop/errors.hpp"
#include "alstop/random.hpp"

namespace alstop {

namespace {

using nlohmann::json;

// Seed sub-stream tags.
constexpr std::uint64_t kMasterStream = 0x6d617374ULL;  // master dataset
constexpr std::uint64_t kGenStream = 0x67656e00ULL;     // per-rep generation
constexpr std::uint64_t kSplitStream = 0x73706c74ULL;   // pool/test split
constexpr std::uint64_t kParamsStream = 0x70726d73ULL;  // hyperparameter fit
constexpr std::uint64_t kEtaStream = 0x65746100ULL;     // eta calibration
constexpr std::uint64_t kCalibStream = 0x63616c62ULL;   // threshold traces
constexpr std::uint64_t kGtStream = 0x67740000ULL;      // bootstrap threshold
constexpr std::uint64_t kRepStream = 0x72657000ULL;     // replications

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sample_stddev(std::span<const double> xs) {
  const auto n = xs.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1));
}

double population_stddev(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / xs.size());
}

}  // namespace

std::vector<double> GridSpec::values() const {
  if (count < 2) throw ConfigError("grid count must be >= 2");
  if (!(min_value > 0.0) || !(max_value > min_value))
    throw ConfigError("grid range must satisfy 0 < min < max");
  std::vector<double> out(count);
  if (log_spaced) {
    const double lo = std::log(min_value), hi = std::log(max_value);
    for (int i = 0; i < count; ++i)
      out[i] = std::exp(lo + (hi - lo) * i / (count - 1));
  } else {
    for (int i = 0; i < count; ++i)
      out[i] = min_value + (max_value - min_value) * i / (count - 1);
  }
  return out;
}

std::pair<double, double> CriterionSpec::default_range(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::kPacBayes: return {0.01, 100.0};
    case CriterionKind::kCrossValidation: return {0.001, 10.0};
    case CriterionKind::kMaxVariance: return {0.0001, 1.0};
    default: return {0.0, 1.0};
  }
}

void ExperimentConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (pool_size < 2) throw ConfigError("pool_size must be >= 2");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (dataset.source == DatasetSpec::Source::kCsv && dataset.path.empty())
    throw ConfigError("csv dataset requires a path");
  if (dataset.source != DatasetSpec::Source::kCsv) {
    if (dataset.n <= pool_size)
      throw ConfigError("generated dataset size must exceed pool_size");
    if (dataset.master_n < 2)
      throw ConfigError("master dataset size must be >= 2");
  }
  if (eta_calibration.repeats < 1 || eta_calibration.train_size < 1)
    throw ConfigError("eta calibration needs repeats >= 1, train_size >= 1");
  if (threshold_calibration.grid_count < 2)
    throw ConfigError("threshold calibration grid_count must be >= 2");
  if (threshold_calibration.replications < 1)
    throw ConfigError("threshold calibration replications must be >= 1");
  if (ground_truth_bootstrap.repeats < 1)
    throw ConfigError("ground truth bootstrap repeats must be >= 1");
  if (criteria.empty()) throw ConfigError("at least one criterion required");
  for (const auto& spec : criteria) {
    spec.config.validate();
    if (spec.policy == ThresholdPolicy::kCalibrate &&
        spec.config.kind == CriterionKind::kProposed)
      throw ConfigError("proposed criterion has no threshold to calibrate");
    if (spec.policy == ThresholdPolicy::kBootstrap &&
        spec.config.kind != CriterionKind::kGroundTruth)
      throw ConfigError("bootstrap thresholds apply to ground_truth only");
  }
  if (fixed_loss_range) fixed_loss_range->validate();
  if (fixed_params) fixed_params->validate();
}

LabeledDataset make_master_dataset(const DatasetSpec& spec,
                                   std::uint64_t seed) {
  switch (spec.source) {
    case DatasetSpec::Source::kArtificial:
      return standardize(generate_artificial(spec.master_n,
                                             spec.noise_precision,
                                             spec.x_range, seed));
    case DatasetSpec::Source::kSignWave:
      return standardize(generate_sign_wave(spec.master_n, seed));
    case DatasetSpec::Source::kCsv:
      return standardize(load_table(spec.path, spec.target_column));
  }
  throw ConfigError("unknown dataset source");
}

namespace {

struct ReplicationData {
  LabeledDataset full;
  LabeledDataset pool;
  LabeledDataset test;
  LossRange loss_range;
};

ReplicationData make_replication_data(const DatasetSpec& spec,
                                      const LabeledDataset& master,
                                      int pool_size,
                                      const std::optional<LossRange>& fixed,
                                      std::uint64_t rep_seed) {
  ReplicationData data;
  switch (spec.source) {
    case DatasetSpec::Source::kArtificial:
      data.full = standardize(generate_artificial(
          spec.n, spec.noise_precision, spec.x_range,
          derive_seed(rep_seed, kGenStream)));
      break;
    case DatasetSpec::Source::kSignWave:
      data.full = standardize(
          generate_sign_wave(spec.n, derive_seed(rep_seed, kGenStream)));
      break;
    case DatasetSpec::Source::kCsv:
      data.full = master;
      break;
  }
  std::tie(data.pool, data.test) =
      split_pool(data.full, pool_size, derive_seed(rep_seed, kSplitStream));
  data.loss_range =
      fixed ? *fixed : LossRange::from_targets(data.full.targets);
  return data;
}

bool threshold_fires(CriterionKind kind, double statistic, double threshold) {
  if (std::isnan(statistic)) return false;
  if (kind == CriterionKind::kGroundTruth) return statistic > threshold;
  return statistic < threshold;
}

}  // namespace

KernelParams resolve_common_params(const ExperimentConfig& cfg,
                                   const LabeledDataset& master) {
  if (cfg.fixed_params) return *cfg.fixed_params;
  int fit_size = cfg.hyperparameter_fit_size > 0 ? cfg.hyperparameter_fit_size
                                                 : cfg.pool_size;
  fit_size = std::min(fit_size, master.size());
  Rng rng(derive_seed(cfg.seed, kParamsStream));
  std::vector<int> idx(master.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = master.size() - 1; i > 0; --i) {
    const int j =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(fit_size);
  const auto subset = master.select(idx);
  return optimize_hyperparameters(subset, cfg.h_grid.values(),
                                  cfg.beta_grid.values());
}

OptimalStop find_optimal_stop(std::span<const double> per_step_test_risk,
                              double eta) {
  if (per_step_test_risk.empty())
    throw ConfigError("find_optimal_stop: empty risk list");
  for (std::size_t i = 0; i < per_step_test_risk.size(); ++i)
    if (per_step_test_risk[i] <= eta)
      return {static_cast<int>(i) + 1, false};
  return {static_cast<int>(per_step_test_risk.size()) + 1, true};
}

int stopping_error(int stop_step, int t_opt) {
  if (stop_step < 1 || t_opt < 1)
    throw ConfigError("stopping_error: steps must be positive");
  return std::abs(stop_step - t_opt);
}

EtaCalibrationDetail calibrate_eta_detailed(const LabeledDataset& dataset,
                                             int train_size, int repeats,
                                             const KernelParams& params,
                                             std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("calibrate_eta: repeats must be >= 1");
  if (train_size < 1 || train_size >= dataset.size())
    throw ConfigError("calibrate_eta: train_size leaves no test data");
  EtaCalibrationDetail result;
  result.risks.reserve(repeats);
  for (int k = 0; k < repeats; ++k) {
    const auto [train, test] =
        split_pool(dataset, train_size, derive_seed(seed, kEtaStream, k));
    const auto post = fit_posterior(train, params);
    result.risks.push_back(empirical_expected_risk(post, test));
  }
  result.mean =
      std::accumulate(result.risks.begin(), result.risks.end(), 0.0) /
      result.risks.size();
  result.sd = population_stddev(result.risks);
  result.eta = result.mean + 2.0 * result.sd;
  return result;
}

double calibrate_eta(const LabeledDataset& dataset, int train_size,
                     int repeats, const KernelParams& params,
                     std::uint64_t seed) {
  return calibrate_eta_detailed(dataset, train_size, repeats, params, seed)
      .eta;
}

CalibrationContext make_calibration_context(const ExperimentConfig& cfg,
                                            const DatasetSpec& dataset,
                                            const KernelParams& params,
                                            double eta) {
  CalibrationContext ctx;
  ctx.dataset = dataset;
  ctx.params = params;
  ctx.eta = eta;
  ctx.pool_size = cfg.pool_size;
  ctx.max_steps = cfg.max_steps;
  ctx.alpha = cfg.alpha;
  ctx.delta = cfg.delta;
  ctx.kappa = cfg.kappa;
  ctx.min_sequence_length = cfg.min_sequence_length;
  ctx.sided = cfg.sided;
  ctx.exact_cutoff = cfg.exact_cutoff;
  ctx.fixed_loss_range = cfg.fixed_loss_range;
  return ctx;
}

double calibrate_threshold(const CalibrationContext& ctx, CriterionKind kind,
                           std::pair<double, double> range, int grid_count,
                           int replications, std::uint64_t seed) {
  if (kind == CriterionKind::kProposed)
    throw ConfigError("proposed criterion has no threshold to calibrate");
  if (grid_count < 2)
    throw ConfigError("calibrate_threshold: grid_count must be >= 2");
  if (!(range.second > range.first))
    throw ConfigError("calibrate_threshold: empty threshold range");

  LabeledDataset master;
  if (ctx.dataset.source == DatasetSpec::Source::kCsv)
    master = make_master_dataset(ctx.dataset, derive_seed(seed, kMasterStream));

  CriterionConfig probe;
  probe.kind = kind;
  probe.delta = ctx.delta;
  probe.kappa = ctx.kappa;
  probe.threshold = std::numeric_limits<double>::quiet_NaN();

  struct TraceRecord {
    std::vector<double> statistic;
    int steps = 0;
    int t_opt = 0;
  };
  std::vector<TraceRecord> records;
  records.reserve(replications);
  for (int rep = 0; rep < replications; ++rep) {
    const std::uint64_t rep_seed = derive_seed(seed, kRepStream, rep);
    const auto data = make_replication_data(
        ctx.dataset, master, ctx.pool_size, ctx.fixed_loss_range, rep_seed);
    ALConfig al;
    al.params = ctx.params;
    probe.loss_range = data.loss_range;
    al.criteria = {probe};
    al.loss_range = data.loss_range;
    al.max_steps = std::min(ctx.max_steps, data.pool.size());
    al.seed = rep_seed;
    const auto trace = run_active_learning(data.pool, &data.test, al);
    TraceRecord record;
    record.statistic = trace.criteria[0].statistic;
    record.steps = trace.steps();
    record.t_opt = find_optimal_stop(trace.test_risk, ctx.eta).t_opt;
    records.push_back(std::move(record));
  }

  double best_threshold = range.first;
  double best_score = std::numeric_limits<double>::infinity();
  for (int g = 0; g < grid_count; ++g) {
    const double threshold =
        range.first + (range.second - range.first) * g / (grid_count - 1);
    double total = 0.0;
    for (const auto& record : records) {
      int stop = record.steps + 1;
      for (std::size_t i = 0; i < record.statistic.size(); ++i) {
        if (threshold_fires(kind, record.statistic[i], threshold)) {
          stop = static_cast<int>(i) + 1;
          break;
        }
      }
      total += stopping_error(stop, record.t_opt);
    }
    const double score = total / records.size();
    if (score < best_score) {
      best_score = score;
      best_threshold = threshold;
    }
  }
  return best_threshold;
}

double bootstrap_ground_truth_threshold(const LabeledDataset& master,
                                        const KernelParams& params,
                                        const GroundTruthBootstrap& cfg,
                                        std::uint64_t seed) {
  if (cfg.repeats < 1)
    throw ConfigError("bootstrap threshold: repeats must be >= 1");
  const double prior_risk =
      empirical_expected_risk(GPPosterior::prior(params), master);
  const int fit_size = std::min(master.size(), cfg.max_fit_size);
  std::vector<double> gains;
  gains.reserve(cfg.repeats);
  for (int b = 0; b < cfg.repeats; ++b) {
    Rng rng(derive_seed(seed, kGtStream, b));
    std::vector<int> idx(fit_size);
    for (int i = 0; i < fit_size; ++i)
      idx[i] = static_cast<int>(
          rng.below(static_cast<std::uint64_t>(master.size())));
    const auto model = fit_posterior(master.select(idx), params);
    gains.push_back(prior_risk - empirical_expected_risk(model, master));
  }
  const double mean =
      std::accumulate(gains.begin(), gains.end(), 0.0) / gains.size();
  return mean - 2.0 * population_stddev(gains);
}

namespace {

std::vector<double> resolve_thresholds(const ExperimentConfig& cfg,
                                       const LabeledDataset& master,
                                       const KernelParams& params,
                                       double eta) {
  std::vector<double> thresholds(cfg.criteria.size(), 0.0);

  bool any_calibrate = false;
  for (const auto& spec : cfg.criteria)
    if (spec.policy == ThresholdPolicy::kCalibrate) any_calibrate = true;

  CalibrationContext ctx;
  if (any_calibrate) {
    if (cfg.reference) {
      // Thresholds transfer from a separate reference dataset, with its own
      // common parameters and eta.
      const auto ref_master = make_master_dataset(
          *cfg.reference, derive_seed(cfg.seed, kMasterStream, 1));
      ExperimentConfig ref_cfg = cfg;
      ref_cfg.dataset = *cfg.reference;
      const auto ref_params = resolve_common_params(ref_cfg, ref_master);
      const double ref_eta =
          cfg.eta ? *cfg.eta
                  : calibrate_eta(ref_master, cfg.eta_calibration.train_size,
                                  cfg.eta_calibration.repeats, ref_params,
                                  derive_seed(cfg.seed, kEtaStream, 1));
      ctx = make_calibration_context(cfg, *cfg.reference, ref_params, ref_eta);
    } else {
      ctx = make_calibration_context(cfg, cfg.dataset, params, eta);
    }
  }

  for (std::size_t i = 0; i < cfg.criteria.size(); ++i) {
    const auto& spec = cfg.criteria[i];
    switch (spec.policy) {
      case ThresholdPolicy::kNone:
        break;
      case ThresholdPolicy::kFixed:
        thresholds[i] = spec.config.threshold;
        break;
      case ThresholdPolicy::kCalibrate:
        thresholds[i] = calibrate_threshold(
            ctx, spec.config.kind, spec.calibration_range,
            cfg.threshold_calibration.grid_count,
            cfg.threshold_calibration.replications,
            derive_seed(cfg.seed, kCalibStream, i));
        break;
      case ThresholdPolicy::kBootstrap:
        thresholds[i] = bootstrap_ground_truth_threshold(
            master, params, cfg.ground_truth_bootstrap,
            derive_seed(cfg.seed, kGtStream, i));
        break;
    }
  }
  return thresholds;
}

}  // namespace

ExperimentSetup make_experiment_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup setup;
  setup.master =
      make_master_dataset(cfg.dataset, derive_seed(cfg.seed, kMasterStream));
  if (cfg.dataset.source == DatasetSpec::Source::kCsv &&
      cfg.pool_size >= setup.master.size())
    throw ConfigError("pool_size must be below the dataset size");
  setup.params = resolve_common_params(cfg, setup.master);
  setup.eta = cfg.eta ? *cfg.eta
                      : calibrate_eta(setup.master,
                                      cfg.eta_calibration.train_size,
                                      cfg.eta_calibration.repeats,
                                      setup.params,
                                      derive_seed(cfg.seed, kEtaStream));
  return setup;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  auto [master, params, eta] = make_experiment_setup(cfg);

  ExperimentReport report;
  report.params = params;
  report.eta = eta;
  const auto thresholds =
      resolve_thresholds(cfg, master, report.params, report.eta);

  for (int rep = 0; rep < cfg.replications; ++rep) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, kRepStream, rep);
    try {
      const auto data =
          make_replication_data(cfg.dataset, master, cfg.pool_size,
                                cfg.fixed_loss_range, rep_seed);
      ALConfig al;
      al.params = report.params;
      al.loss_range = data.loss_range;
      al.max_steps = std::min(cfg.max_steps, data.pool.size());
      al.seed = rep_seed;
      al.criteria.reserve(cfg.criteria.size());
      for (std::size_t i = 0; i < cfg.criteria.size(); ++i) {
        CriterionConfig criterion = cfg.criteria[i].config;
        criterion.threshold = thresholds[i];
        if (criterion.kind == CriterionKind::kPacBayes)
          criterion.loss_range = data.loss_range;
        al.criteria.push_back(criterion);
      }

      auto trace = run_active_learning(data.pool, &data.test, al);
      const auto optimal = find_optimal_stop(trace.test_risk, report.eta);

      ReplicationRecord record;
      record.rep = rep;
      record.seed = rep_seed;
      record.steps = trace.steps();
      record.t_opt = optimal.t_opt;
      record.t_opt_unreached = optimal.unreached;
      for (const auto& outcome : trace.criteria) {
        CriterionResult result;
        result.name = criterion_name(outcome.config.kind);
        result.stop_step = outcome.stop_step;
        result.scored_stop = outcome.stop_step.value_or(trace.steps() + 1);
        result.e_stop = stopping_error(result.scored_stop, record.t_opt);
        record.criteria.push_back(std::move(result));
      }
      report.records.push_back(std::move(record));
      report.traces.push_back(std::move(trace));
    } catch (const std::exception& e) {
      report.errors.push_back({rep, e.what()});
    }
  }

  // Aggregates per criterion, in config order.
  for (std::size_t i = 0; i < cfg.criteria.size(); ++i) {
    CriterionAggregate agg;
    agg.name = criterion_name(cfg.criteria[i].config.kind);
    if (cfg.criteria[i].policy == ThresholdPolicy::kFixed ||
        cfg.criteria[i].policy == ThresholdPolicy::kCalibrate ||
        cfg.criteria[i].policy == ThresholdPolicy::kBootstrap)
      agg.threshold = thresholds[i];
    std::vector<double> e_stops, stops;
    for (const auto& record : report.records) {
      e_stops.push_back(record.criteria[i].e_stop);
      stops.push_back(record.criteria[i].scored_stop);
      if (!record.criteria[i].stop_step) ++agg.unfired;
    }
    if (!e_stops.empty()) {
      agg.mean_e_stop =
          std::accumulate(e_stops.begin(), e_stops.end(), 0.0) /
          e_stops.size();
      agg.stderr_e_stop =
          sample_stddev(e_stops) / std::sqrt(static_cast<double>(e_stops.size()));
      agg.mean_stop =
          std::accumulate(stops.begin(), stops.end(), 0.0) / stops.size();
    }
    report.aggregates.push_back(std::move(agg));
  }

  // Per-step test-risk curve averaged over the successful replications.
  std::size_t max_len = 0;
  for (const auto& trace : report.traces)
    max_len = std::max(max_len, trace.test_risk.size());
  report.mean_risk_curve.assign(max_len, 0.0);
  for (std::size_t s = 0; s < max_len; ++s) {
    double total = 0.0;
    int count = 0;
    for (const auto& trace : report.traces) {
      if (s < trace.test_risk.size()) {
        total += trace.test_risk[s];
        ++count;
      }
    }
    report.mean_risk_curve[s] = count > 0 ? total / count : kNaN;
  }

  if (!cfg.output_dir.empty())
    write_experiment_outputs(report, cfg, cfg.output_dir);
  return report;
}

// ---------------------------------------------------------------------------
// JSON config parsing
// ---------------------------------------------------------------------------

namespace {

DatasetSpec parse_dataset_spec(const json& j) {
  DatasetSpec spec;
  const std::string source = j.value("source", std::string("artificial"));
  if (source == "artificial")
    spec.source = DatasetSpec::Source::kArtificial;
  else if (source == "signwave")
    spec.source = DatasetSpec::Source::kSignWave;
  else if (source == "csv")
    spec.source = DatasetSpec::Source::kCsv;
  else
    throw ConfigError("unknown dataset source '" + source + "'");
  spec.n = j.value("n", spec.n);
  spec.master_n = j.value("master_n", spec.master_n);
  spec.noise_precision = j.value("noise_precision", spec.noise_precision);
  if (j.contains("x_range")) {
    const auto& r = j.at("x_range");
    if (!r.is_array() || r.size() != 2)
      throw ConfigError("x_range must be [lo, hi]");
    spec.x_range = {r[0].get<double>(), r[1].get<double>()};
  }
  spec.path = j.value("path", spec.path);
  if (j.contains("target_column")) {
    const auto& t = j.at("target_column");
    if (t.is_string())
      spec.target_column = t.get<std::string>();
    else if (t.is_number_integer())
      spec.target_column = t.get<int>();
    else
      throw ConfigError("target_column must be a name or 0-based index");
  }
  return spec;
}

GridSpec parse_grid_spec(const json& j, const GridSpec& defaults) {
  GridSpec grid = defaults;
  grid.min_value = j.value("min", grid.min_value);
  grid.max_value = j.value("max", grid.max_value);
  grid.count = j.value("count", grid.count);
  grid.log_spaced = j.value("log", grid.log_spaced);
  return grid;
}

RunsSided parse_sided(const std::string& s) {
  if (s == "two") return RunsSided::kTwo;
  if (s == "lower") return RunsSided::kLower;
  throw ConfigError("sided must be 'two' or 'lower'");
}

CriterionSpec parse_criterion_spec(const json& j,
                                   const ExperimentConfig& defaults) {
  CriterionSpec spec;
  spec.config.kind = criterion_from_name(j.at("kind").get<std::string>());
  spec.config.alpha = j.value("alpha", defaults.alpha);
  spec.config.min_sequence_length =
      j.value("min_sequence_length", defaults.min_sequence_length);
  spec.config.sided = defaults.sided;
  if (j.contains("sided"))
    spec.config.sided = parse_sided(j.at("sided").get<std::string>());
  spec.config.exact_cutoff = j.value("exact_cutoff", defaults.exact_cutoff);
  spec.config.delta = j.value("delta", defaults.delta);
  spec.config.kappa = j.value("kappa", defaults.kappa);
  spec.config.folds = j.value("folds", 5);

  spec.calibration_range = CriterionSpec::default_range(spec.config.kind);
  if (j.contains("range")) {
    const auto& r = j.at("range");
    if (!r.is_array() || r.size() != 2)
      throw ConfigError("criterion range must be [lo, hi]");
    spec.calibration_range = {r[0].get<double>(), r[1].get<double>()};
  }

  if (spec.config.kind == CriterionKind::kProposed) {
    spec.policy = ThresholdPolicy::kNone;
    return spec;
  }
  if (!j.contains("threshold")) {
    spec.policy = spec.config.kind == CriterionKind::kGroundTruth
                      ? ThresholdPolicy::kBootstrap
                      : ThresholdPolicy::kCalibrate;
    return spec;
  }
  const auto& t = j.at("threshold");
  if (t.is_number()) {
    spec.policy = ThresholdPolicy::kFixed;
    spec.config.threshold = t.get<double>();
  } else if (t.is_string() && t.get<std::string>() == "calibrate") {
    spec.policy = ThresholdPolicy::kCalibrate;
  } else if (t.is_string() && t.get<std::string>() == "bootstrap") {
    spec.policy = ThresholdPolicy::kBootstrap;
  } else {
    throw ConfigError("threshold must be a number, 'calibrate' or 'bootstrap'");
  }
  return spec;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("dataset")) cfg.dataset = parse_dataset_spec(j.at("dataset"));
    if (j.contains("reference"))
      cfg.reference = parse_dataset_spec(j.at("reference"));
    cfg.pool_size = j.value("pool_size", cfg.pool_size);
    cfg.replications = j.value("replications", cfg.replications);
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.kappa = j.value("kappa", cfg.kappa);
    cfg.min_sequence_length =
        j.value("min_sequence_length", cfg.min_sequence_length);
    if (j.contains("runs_test")) {
      const auto& r = j.at("runs_test");
      if (r.contains("sided"))
        cfg.sided = parse_sided(r.at("sided").get<std::string>());
      cfg.exact_cutoff = r.value("exact_cutoff", cfg.exact_cutoff);
    }
    if (j.contains("hyperparameters")) {
      const auto& h = j.at("hyperparameters");
      if (h.contains("h") && h.contains("beta")) {
        cfg.fixed_params =
            KernelParams{h.at("h").get<double>(), h.at("beta").get<double>()};
      }
      if (h.contains("h_grid"))
        cfg.h_grid = parse_grid_spec(h.at("h_grid"), cfg.h_grid);
      if (h.contains("beta_grid"))
        cfg.beta_grid = parse_grid_spec(h.at("beta_grid"), cfg.beta_grid);
      cfg.hyperparameter_fit_size =
          h.value("fit_size", cfg.hyperparameter_fit_size);
    }
    if (j.contains("eta")) {
      const auto& e = j.at("eta");
      if (e.is_number())
        cfg.eta = e.get<double>();
      else if (!(e.is_string() && e.get<std::string>() == "calibrate"))
        throw ConfigError("eta must be a number or 'calibrate'");
    }
    if (j.contains("eta_calibration")) {
      const auto& e = j.at("eta_calibration");
      cfg.eta_calibration.train_size =
          e.value("train_size", cfg.eta_calibration.train_size);
      cfg.eta_calibration.repeats =
          e.value("repeats", cfg.eta_calibration.repeats);
    }
    if (j.contains("threshold_calibration")) {
      const auto& t = j.at("threshold_calibration");
      cfg.threshold_calibration.replications =
          t.value("replications", cfg.threshold_calibration.replications);
      cfg.threshold_calibration.grid_count =
          t.value("grid_count", cfg.threshold_calibration.grid_count);
    }
    if (j.contains("ground_truth_bootstrap")) {
      const auto& g = j.at("ground_truth_bootstrap");
      cfg.ground_truth_bootstrap.repeats =
          g.value("repeats", cfg.ground_truth_bootstrap.repeats);
      cfg.ground_truth_bootstrap.max_fit_size =
          g.value("max_fit_size", cfg.ground_truth_bootstrap.max_fit_size);
    }
    if (j.contains("loss_range")) {
      const auto& r = j.at("loss_range");
      if (r.is_array() && r.size() == 2)
        cfg.fixed_loss_range =
            LossRange{r[0].get<double>(), r[1].get<double>()};
      else if (!(r.is_string() && r.get<std::string>() == "auto"))
        throw ConfigError("loss_range must be [a, b] or 'auto'");
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    if (j.contains("criteria")) {
      if (!j.at("criteria").is_array())
        throw ConfigError("criteria must be an array");
      cfg.criteria.clear();
      for (const auto& c : j.at("criteria"))
        cfg.criteria.push_back(parse_criterion_spec(c, cfg));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

namespace {

std::string format_sig(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

json criterion_result_to_json(const CriterionResult& result) {
  json j;
  j["name"] = result.name;
  if (result.stop_step)
    j["stop_step"] = *result.stop_step;
  else
    j["stop_step"] = nullptr;
  j["scored_stop"] = result.scored_stop;
  j["e_stop"] = result.e_stop;
  return j;
}

}  // namespace

std::string experiment_report_to_json(const ExperimentReport& report,
                                      const ExperimentConfig& cfg) {
  json j;
  j["eta"] = report.eta;
  j["kernel"] = {{"h", report.params.length_scale},
                 {"beta", report.params.noise_precision}};
  j["config"] = {{"pool_size", cfg.pool_size},
                 {"replications", cfg.replications},
                 {"max_steps", cfg.max_steps},
                 {"seed", cfg.seed},
                 {"alpha", cfg.alpha},
                 {"delta", cfg.delta},
                 {"kappa", cfg.kappa},
                 {"min_sequence_length", cfg.min_sequence_length}};
  j["replications"] = json::array();
  for (const auto& record : report.records) {
    json r;
    r["rep"] = record.rep;
    r["seed"] = record.seed;
    r["steps"] = record.steps;
    r["t_opt"] = record.t_opt;
    r["t_opt_unreached"] = record.t_opt_unreached;
    r["criteria"] = json::array();
    for (const auto& result : record.criteria)
      r["criteria"].push_back(criterion_result_to_json(result));
    j["replications"].push_back(std::move(r));
  }
  j["errors"] = json::array();
  for (const auto& error : report.errors)
    j["errors"].push_back({{"rep", error.rep}, {"message", error.message}});
  j["aggregates"] = json::array();
  for (const auto& agg : report.aggregates) {
    json a;
    a["criterion"] = agg.name;
    a["mean_e_stop"] = agg.mean_e_stop;
    a["stderr_e_stop"] = agg.stderr_e_stop;
    a["mean_stop"] = agg.mean_stop;
    a["unfired"] = agg.unfired;
    if (agg.threshold) a["threshold"] = *agg.threshold;
    j["aggregates"].push_back(std::move(a));
  }
  j["mean_risk_curve"] = report.mean_risk_curve;
  return j.dump(2);
}

void write_experiment_outputs(const ExperimentReport& report,
                              const ExperimentConfig& cfg,
                              const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "'");

  {
    std::ofstream out(fs::path(dir) / "report.json");
    if (!out) throw DataError("cannot write report.json");
    out << experiment_report_to_json(report, cfg) << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "summary.csv");
    if (!out) throw DataError("cannot write summary.csv");
    out << "criterion,mean_e_stop,stderr_e_stop\n";
    for (const auto& agg : report.aggregates)
      out << agg.name << ',' << format_sig(agg.mean_e_stop) << ','
          << format_sig(agg.stderr_e_stop) << '\n';
  }
  for (std::size_t k = 0; k < report.traces.size(); ++k) {
    const auto& trace = report.traces[k];
    const int rep = k < report.records.size() ? report.records[k].rep
                                              : static_cast<int>(k);
    std::ofstream out(fs::path(dir) /
                      ("trace_" + std::to_string(rep) + ".csv"));
    if (!out) throw DataError("cannot write trace csv");
    out << "step,r_t,kl_t,z,test_risk";
    for (const auto& outcome : trace.criteria)
      out << ",fired_" << criterion_name(outcome.config.kind);
    out << '\n';
    for (int n = 1; n <= trace.steps(); ++n) {
      const int b = n - 2;  // bound index for the step that produced size n
      out << n << ',';
      out << (b >= 0 ? format_sig(trace.bound_trace.r_values[b]) : "nan");
      out << ',';
      out << (b >= 0 ? format_sig(trace.bound_trace.kl_values[b]) : "nan");
      out << ',';
      out << (b >= 0 ? format_sig(trace.bound_trace.decisions[b].z) : "nan");
      out << ',';
      out << (n - 1 < static_cast<int>(trace.test_risk.size())
                  ? format_sig(trace.test_risk[n - 1])
                  : "nan");
      for (const auto& outcome : trace.criteria)
        out << ',' << static_cast<int>(outcome.fired[n - 1]);
      out << '\n';
    }
  }
}

}  // namespace alstop
