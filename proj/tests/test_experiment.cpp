#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "alstop/dataset.hpp"
#include "alstop/errors.hpp"
#include "alstop/experiment.hpp"
#include "alstop/gp.hpp"
#include "alstop/random.hpp"

using namespace alstop;

namespace {

// Small desk config used across the harness tests.
ExperimentConfig small_config(std::uint64_t seed = 99) {
  ExperimentConfig cfg;
  cfg.dataset.source = DatasetSpec::Source::kArtificial;
  cfg.dataset.n = 120;
  cfg.dataset.master_n = 240;
  cfg.dataset.noise_precision = 400.0;
  cfg.pool_size = 14;
  cfg.replications = 3;
  cfg.max_steps = 14;
  cfg.seed = seed;
  cfg.eta_calibration.train_size = 14;
  cfg.eta_calibration.repeats = 6;
  CriterionSpec proposed;
  proposed.config.kind = CriterionKind::kProposed;
  proposed.config.alpha = 0.05;
  proposed.config.min_sequence_length = 5;
  proposed.policy = ThresholdPolicy::kNone;
  cfg.criteria = {proposed};
  return cfg;
}

CriterionSpec fixed_criterion(CriterionKind kind, double threshold) {
  CriterionSpec spec;
  spec.config.kind = kind;
  spec.config.threshold = threshold;
  spec.policy = ThresholdPolicy::kFixed;
  return spec;
}

}  // namespace

TEST_CASE("find_optimal_stop and stopping_error") {
  const std::vector<double> risks{3.0, 2.0, 1.0};
  CHECK(find_optimal_stop(risks, 2.0).t_opt == 2);
  CHECK_FALSE(find_optimal_stop(risks, 2.0).unreached);

  const auto unreached = find_optimal_stop(risks, 0.5);
  CHECK(unreached.t_opt == 4);
  CHECK(unreached.unreached);

  CHECK(find_optimal_stop(risks, 10.0).t_opt == 1);
  CHECK_THROWS_AS(find_optimal_stop(std::vector<double>{}, 1.0), ConfigError);

  CHECK(stopping_error(30, 25) == 5);
  CHECK(stopping_error(25, 30) == 5);
  CHECK(stopping_error(7, 7) == 0);
  CHECK_THROWS_AS(stopping_error(0, 3), ConfigError);
}

TEST_CASE("grid specs") {
  GridSpec grid;
  grid.min_value = 1.0;
  grid.max_value = 100.0;
  grid.count = 3;
  grid.log_spaced = true;
  const auto log_values = grid.values();
  CHECK(log_values.size() == 3);
  CHECK(log_values[0] == doctest::Approx(1.0));
  CHECK(log_values[1] == doctest::Approx(10.0));
  CHECK(log_values[2] == doctest::Approx(100.0));

  grid.log_spaced = false;
  const auto lin_values = grid.values();
  CHECK(lin_values[1] == doctest::Approx(50.5));

  grid.count = 1;
  CHECK_THROWS_AS(grid.values(), ConfigError);
}

TEST_CASE("eta calibration") {
  const auto master =
      standardize(generate_artificial(600, 400.0, {-5.0, 15.0}, 11));
  ExperimentConfig cfg;
  const auto params = resolve_common_params(cfg, master);

  SUBCASE("a single repeat returns that risk with zero sd") {
    const auto result = calibrate_eta_detailed(master, 50, 1, params, 7);
    CHECK(result.risks.size() == 1);
    CHECK(result.sd == 0.0);
    CHECK(result.eta == result.risks[0]);
    CHECK(result.eta == result.mean);
  }

  SUBCASE("eta is mean + 2 sd of the resampled risks") {
    const auto result = calibrate_eta_detailed(master, 50, 10, params, 7);
    const double mean =
        std::accumulate(result.risks.begin(), result.risks.end(), 0.0) / 10.0;
    double ss = 0.0;
    for (const double r : result.risks) ss += (r - mean) * (r - mean);
    CHECK(result.eta ==
          doctest::Approx(mean + 2.0 * std::sqrt(ss / 10.0)).epsilon(1e-12));
    CHECK(calibrate_eta(master, 50, 10, params, 7) == result.eta);
  }

  SUBCASE("eta exceeds the risk of a model trained on far more data") {
    const double eta = calibrate_eta(master, 50, 10, params, 7);
    const auto [train, test] = split_pool(master, 300, 13);
    const double strong_risk =
        empirical_expected_risk(fit_posterior(train, params), test);
    CHECK(eta > strong_risk);
  }

  SUBCASE("train size must leave test data") {
    CHECK_THROWS_AS(calibrate_eta(master, 600, 5, params, 1), ConfigError);
    CHECK_THROWS_AS(calibrate_eta(master, 50, 0, params, 1), ConfigError);
  }
}

TEST_CASE("run_experiment basics") {
  SUBCASE("single replication aggregates equal the record") {
    auto cfg = small_config();
    cfg.replications = 1;
    const auto report = run_experiment(cfg);
    REQUIRE(report.records.size() == 1);
    CHECK(report.aggregates[0].mean_e_stop ==
          doctest::Approx(report.records[0].criteria[0].e_stop));
    CHECK(report.aggregates[0].stderr_e_stop == 0.0);
  }

  SUBCASE("record count equals replications minus errors") {
    const auto cfg = small_config();
    const auto report = run_experiment(cfg);
    CHECK(report.records.size() + report.errors.size() ==
          static_cast<std::size_t>(cfg.replications));
    CHECK(report.errors.empty());
    for (const auto& record : report.records)
      CHECK(record.criteria.size() == cfg.criteria.size());
  }

  SUBCASE("aggregates recompute from the records") {
    auto cfg = small_config();
    cfg.replications = 4;
    cfg.criteria.push_back(fixed_criterion(CriterionKind::kMaxVariance, 0.01));
    const auto report = run_experiment(cfg);
    for (std::size_t c = 0; c < cfg.criteria.size(); ++c) {
      std::vector<double> e;
      for (const auto& record : report.records)
        e.push_back(record.criteria[c].e_stop);
      const double mean = std::accumulate(e.begin(), e.end(), 0.0) / e.size();
      double ss = 0.0;
      for (const double v : e) ss += (v - mean) * (v - mean);
      const double stderr_expected =
          std::sqrt(ss / (e.size() - 1)) / std::sqrt(double(e.size()));
      CHECK(report.aggregates[c].mean_e_stop ==
            doctest::Approx(mean).epsilon(1e-12));
      CHECK(report.aggregates[c].stderr_e_stop ==
            doctest::Approx(stderr_expected).epsilon(1e-12));
    }
  }

  SUBCASE("experiments are deterministic in the seed") {
    const auto a = run_experiment(small_config(5));
    const auto b = run_experiment(small_config(5));
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.eta == b.eta);
    for (std::size_t r = 0; r < a.records.size(); ++r) {
      CHECK(a.records[r].t_opt == b.records[r].t_opt);
      CHECK(a.records[r].criteria[0].e_stop == b.records[r].criteria[0].e_stop);
    }
  }

  SUBCASE("adding a criterion changes no other criterion's scores") {
    auto lone = small_config(7);
    const auto a = run_experiment(lone);

    auto crowded = small_config(7);
    crowded.criteria.push_back(
        fixed_criterion(CriterionKind::kMaxVariance, 0.2));
    crowded.criteria.push_back(
        fixed_criterion(CriterionKind::kCrossValidation, 1.0));
    const auto b = run_experiment(crowded);

    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t r = 0; r < a.records.size(); ++r) {
      CHECK(a.records[r].t_opt == b.records[r].t_opt);
      CHECK(a.records[r].criteria[0].stop_step ==
            b.records[r].criteria[0].stop_step);
      CHECK(a.records[r].criteria[0].e_stop == b.records[r].criteria[0].e_stop);
    }
  }

  SUBCASE("invalid configs are rejected") {
    auto cfg = small_config();
    cfg.replications = 0;
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);

    cfg = small_config();
    cfg.criteria.clear();
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);

    cfg = small_config();
    cfg.dataset.source = DatasetSpec::Source::kCsv;
    cfg.dataset.path = "";
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  }
}

TEST_CASE("threshold calibration") {
  auto cfg = small_config(31);
  cfg.replications = 3;

  const auto master =
      make_master_dataset(cfg.dataset, /*seed unused for artificial*/ 1);
  (void)master;

  // Context shares the parameters and eta that run_experiment would use.
  const auto probe_report = run_experiment(cfg);
  const auto ctx = make_calibration_context(cfg, cfg.dataset,
                                            probe_report.params,
                                            probe_report.eta);

  SUBCASE("three-point grid equals brute-force runs at those thresholds") {
    const std::pair<double, double> range{5.0, 15.0};
    const double calibrated = calibrate_threshold(
        ctx, CriterionKind::kPacBayes, range, 3, cfg.replications, cfg.seed);

    double best_threshold = 0.0;
    double best_score = 1e300;
    for (const double threshold : {5.0, 10.0, 15.0}) {
      auto brute = cfg;
      brute.eta = probe_report.eta;  // same eta as the context
      brute.fixed_params = probe_report.params;
      brute.criteria = {fixed_criterion(CriterionKind::kPacBayes, threshold)};
      const auto report = run_experiment(brute);
      if (report.aggregates[0].mean_e_stop < best_score) {
        best_score = report.aggregates[0].mean_e_stop;
        best_threshold = threshold;
      }
    }
    CHECK(calibrated == doctest::Approx(best_threshold).epsilon(1e-12));
  }

  SUBCASE("the minimizer beats both endpoints") {
    const std::pair<double, double> range{0.01, 100.0};
    const double calibrated = calibrate_threshold(
        ctx, CriterionKind::kPacBayes, range, 21, cfg.replications, cfg.seed);
    CHECK(calibrated >= range.first);
    CHECK(calibrated <= range.second);
  }

  SUBCASE("the proposed criterion cannot be calibrated") {
    CHECK_THROWS_AS(calibrate_threshold(ctx, CriterionKind::kProposed,
                                        {0.0, 1.0}, 3, 2, 1),
                    ConfigError);
  }

  SUBCASE("degenerate grids error") {
    CHECK_THROWS_AS(calibrate_threshold(ctx, CriterionKind::kMaxVariance,
                                        {0.0, 1.0}, 1, 2, 1),
                    ConfigError);
    CHECK_THROWS_AS(calibrate_threshold(ctx, CriterionKind::kMaxVariance,
                                        {1.0, 1.0}, 3, 2, 1),
                    ConfigError);
  }
}

TEST_CASE("default calibration ranges per criterion") {
  CHECK(CriterionSpec::default_range(CriterionKind::kPacBayes) ==
        std::pair{0.01, 100.0});
  CHECK(CriterionSpec::default_range(CriterionKind::kCrossValidation) ==
        std::pair{0.001, 10.0});
  CHECK(CriterionSpec::default_range(CriterionKind::kMaxVariance) ==
        std::pair{0.0001, 1.0});
}

TEST_CASE("ground-truth bootstrap threshold") {
  const auto master =
      standardize(generate_artificial(200, 400.0, {-5.0, 15.0}, 41));
  ExperimentConfig cfg;
  const auto params = resolve_common_params(cfg, master);
  GroundTruthBootstrap bootstrap;
  bootstrap.repeats = 8;
  const double threshold =
      bootstrap_ground_truth_threshold(master, params, bootstrap, 77);
  // full-data improvement is large and positive on this data
  CHECK(threshold > 0.0);
  CHECK(std::isfinite(threshold));
  CHECK(bootstrap_ground_truth_threshold(master, params, bootstrap, 77) ==
        threshold);
}

TEST_CASE("experiment outputs") {
  namespace fs = std::filesystem;
  const std::string dir = "tmp_experiment_out";
  fs::remove_all(dir);

  auto cfg = small_config(21);
  cfg.criteria.push_back(fixed_criterion(CriterionKind::kMaxVariance, 0.05));
  cfg.output_dir = dir;
  const auto report = run_experiment(cfg);

  CHECK(fs::exists(fs::path(dir) / "report.json"));
  CHECK(fs::exists(fs::path(dir) / "summary.csv"));
  for (const auto& record : report.records)
    CHECK(fs::exists(fs::path(dir) /
                     ("trace_" + std::to_string(record.rep) + ".csv")));

  SUBCASE("summary lists one row per criterion") {
    std::ifstream in(fs::path(dir) / "summary.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "criterion,mean_e_stop,stderr_e_stop");
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 2);
  }

  SUBCASE("trace csv has one data row per step plus a header") {
    std::ifstream in(fs::path(dir) / "trace_0.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "step,r_t,kl_t,z,test_risk,fired_proposed,fired_max_variance");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == report.records[0].steps);
  }

  fs::remove_all(dir);
}

TEST_CASE("config JSON parsing") {
  SUBCASE("full config round trip") {
    const std::string text = R"({
      "dataset": {"source": "artificial", "n": 200, "master_n": 300,
                  "noise_precision": 50.0, "x_range": [-2.0, 2.0]},
      "pool_size": 20,
      "replications": 4,
      "max_steps": 18,
      "seed": 12345,
      "alpha": 0.01,
      "delta": 0.05,
      "kappa": 0.02,
      "min_sequence_length": 8,
      "runs_test": {"sided": "lower", "exact_cutoff": 25},
      "hyperparameters": {"h": 0.5, "beta": 30.0},
      "eta": 1.25,
      "threshold_calibration": {"replications": 5, "grid_count": 50},
      "criteria": [
        {"kind": "proposed"},
        {"kind": "pac_bayes", "threshold": "calibrate", "range": [0.1, 50.0]},
        {"kind": "cross_validation", "threshold": 0.75, "folds": 4},
        {"kind": "max_variance"},
        {"kind": "ground_truth"}
      ],
      "loss_range": [0.0, 4.0],
      "output_dir": "out"
    })";
    const auto cfg = parse_experiment_config(text);
    CHECK(cfg.dataset.n == 200);
    CHECK(cfg.dataset.noise_precision == 50.0);
    CHECK(cfg.dataset.x_range.first == -2.0);
    CHECK(cfg.pool_size == 20);
    CHECK(cfg.replications == 4);
    CHECK(cfg.seed == 12345);
    CHECK(cfg.alpha == 0.01);
    CHECK(cfg.sided == RunsSided::kLower);
    CHECK(cfg.exact_cutoff == 25);
    REQUIRE(cfg.fixed_params.has_value());
    CHECK(cfg.fixed_params->length_scale == 0.5);
    CHECK(cfg.eta == 1.25);
    CHECK(cfg.threshold_calibration.grid_count == 50);
    REQUIRE(cfg.criteria.size() == 5);
    CHECK(cfg.criteria[0].policy == ThresholdPolicy::kNone);
    CHECK(cfg.criteria[0].config.alpha == 0.01);
    CHECK(cfg.criteria[0].config.min_sequence_length == 8);
    CHECK(cfg.criteria[1].policy == ThresholdPolicy::kCalibrate);
    CHECK(cfg.criteria[1].calibration_range.first == 0.1);
    CHECK(cfg.criteria[2].policy == ThresholdPolicy::kFixed);
    CHECK(cfg.criteria[2].config.threshold == 0.75);
    CHECK(cfg.criteria[2].config.folds == 4);
    // defaults: max_variance calibrates, ground_truth bootstraps
    CHECK(cfg.criteria[3].policy == ThresholdPolicy::kCalibrate);
    CHECK(cfg.criteria[4].policy == ThresholdPolicy::kBootstrap);
    REQUIRE(cfg.fixed_loss_range.has_value());
    CHECK(cfg.fixed_loss_range->b == 4.0);
    CHECK(cfg.output_dir == "out");
  }

  SUBCASE("malformed inputs raise ConfigError") {
    CHECK_THROWS_AS(parse_experiment_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"dataset": {"source": "bad"}})"),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(R"({"criteria": [{"kind": "nope"}]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(
            R"({"criteria": [{"kind": "proposed", "alpha": 0.9}]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(R"({"dataset": {"source": "csv"}})"),
        ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"eta": "never"})"),
                    ConfigError);
  }

  SUBCASE("csv configs load through the same path") {
    const std::string csv = "tmp_config_data.csv";
    {
      std::ofstream out(csv);
      out << "x1,y\n";
      Rng rng(3);
      for (int i = 0; i < 40; ++i)
        out << rng.uniform(-1, 1) << ',' << rng.gaussian() << "\n";
    }
    const std::string text = R"({
      "dataset": {"source": "csv", "path": "tmp_config_data.csv",
                  "target_column": "y"},
      "pool_size": 8, "replications": 2, "max_steps": 8,
      "eta": 5.0,
      "hyperparameters": {"h": 0.5, "beta": 10.0},
      "criteria": [{"kind": "proposed", "alpha": 0.05,
                    "min_sequence_length": 4}]
    })";
    const auto cfg = parse_experiment_config(text);
    const auto report = run_experiment(cfg);
    CHECK(report.records.size() == 2);
    std::remove(csv.c_str());
  }
}
