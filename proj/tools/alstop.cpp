// alstop: active-learning experiments with automatic stopping.
//
// Subcommands:
//   run                 replicated experiment from a JSON config
//   calibrate-eta       risk threshold for the optimal stopping time
//   calibrate-threshold threshold scan for a baseline criterion
//   runstest            median-binarized runs test on a value sequence
//   generate            write a synthetic dataset as CSV

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "alstop/active_learning.hpp"
#include "alstop/dataset.hpp"
#include "alstop/errors.hpp"
#include "alstop/experiment.hpp"
#include "alstop/runs_test.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::vector<double> read_values(const std::string& path) {
  std::istream* in = &std::cin;
  std::ifstream file;
  if (!path.empty()) {
    file.open(path);
    if (!file) throw alstop::DataError("cannot open '" + path + "'");
    in = &file;
  }
  std::vector<double> values;
  double v = 0.0;
  while (*in >> v) values.push_back(v);
  if (!in->eof() && in->fail())
    throw alstop::DataError("input contains a non-numeric token");
  if (values.empty()) throw alstop::DataError("no input values");
  return values;
}

int run_runstest(const std::string& input, double alpha,
                 const std::string& mode, const std::string& sided,
                 int exact_cutoff) {
  const auto values = read_values(input);
  const auto bits = alstop::binarize_by_median(values);

  alstop::RunsMode runs_mode;
  if (mode == "exact")
    runs_mode = alstop::RunsMode::kExact;
  else if (mode == "normal")
    runs_mode = alstop::RunsMode::kNormal;
  else if (mode == "auto")
    runs_mode = bits.length() <= exact_cutoff ? alstop::RunsMode::kExact
                                              : alstop::RunsMode::kNormal;
  else
    throw alstop::ConfigError("mode must be exact, normal or auto");
  const auto runs_sided = sided == "lower" ? alstop::RunsSided::kLower
                                           : alstop::RunsSided::kTwo;

  const auto report = alstop::runs_test(bits, alpha, runs_mode, runs_sided);
  json j;
  j["n"] = report.n;
  j["t0"] = report.t0;
  j["t1"] = report.t1;
  j["u"] = report.u;
  j["mu"] = report.mu;
  j["sigma2"] = report.sigma2;
  j["z"] = report.z;
  j["p_value"] = report.p_value;
  j["reject_randomness"] = report.reject_randomness;
  j["degenerate"] = report.degenerate;
  j["mode"] = report.mode == alstop::RunsMode::kExact ? "exact" : "normal";
  j["sided"] = report.sided == alstop::RunsSided::kTwo ? "two" : "lower";
  j["alpha"] = alpha;
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run_generate(const std::string& name, int n, std::uint64_t seed,
                 double noise_precision, std::pair<double, double> range,
                 const std::string& output) {
  alstop::LabeledDataset ds;
  if (name == "artificial")
    ds = alstop::generate_artificial(n, noise_precision, range, seed);
  else if (name == "signwave")
    ds = alstop::generate_sign_wave(n, seed);
  else
    throw alstop::ConfigError("generator must be 'artificial' or 'signwave'");

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw alstop::DataError("cannot write '" + output + "'");
    out = &file;
  }
  for (int j = 0; j < ds.dim(); ++j) *out << 'x' << (j + 1) << ',';
  *out << "y\n";
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.inputs(i, j));
      *out << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ds.targets(i));
    *out << buf << '\n';
  }
  return kExitOk;
}

int run_calibrate_eta(const std::string& config_path, int repeats_override,
                      int train_size_override) {
  auto cfg = alstop::load_experiment_config(config_path);
  if (repeats_override > 0) cfg.eta_calibration.repeats = repeats_override;
  if (train_size_override > 0)
    cfg.eta_calibration.train_size = train_size_override;
  const auto setup = alstop::make_experiment_setup(cfg);
  const auto& params = setup.params;
  const double eta = setup.eta;
  json j;
  j["eta"] = eta;
  j["kernel"] = {{"h", params.length_scale},
                 {"beta", params.noise_precision}};
  j["repeats"] = cfg.eta_calibration.repeats;
  j["train_size"] = cfg.eta_calibration.train_size;
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run_calibrate_threshold(const std::string& config_path,
                            const std::string& criterion,
                            std::pair<double, double> range_override,
                            int grid_override) {
  auto cfg = alstop::load_experiment_config(config_path);
  const auto kind = alstop::criterion_from_name(criterion);

  const auto setup = alstop::make_experiment_setup(cfg);
  const auto& params = setup.params;
  const double eta = setup.eta;

  auto range = alstop::CriterionSpec::default_range(kind);
  for (const auto& spec : cfg.criteria)
    if (spec.config.kind == kind) range = spec.calibration_range;
  if (range_override.second > range_override.first) range = range_override;
  const int grid = grid_override > 0 ? grid_override
                                     : cfg.threshold_calibration.grid_count;

  const auto ctx = alstop::make_calibration_context(cfg, cfg.dataset, params, eta);
  const double threshold = alstop::calibrate_threshold(
      ctx, kind, range, grid, cfg.threshold_calibration.replications,
      cfg.seed);
  json j;
  j["criterion"] = criterion;
  j["threshold"] = threshold;
  j["range"] = {range.first, range.second};
  j["grid_count"] = grid;
  j["eta"] = eta;
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int run_experiment_cmd(const std::string& config_path,
                       const std::string& output_override) {
  auto cfg = alstop::load_experiment_config(config_path);
  if (!output_override.empty()) cfg.output_dir = output_override;
  const auto report = alstop::run_experiment(cfg);
  std::cout << alstop::experiment_report_to_json(report, cfg) << '\n';
  if (!cfg.output_dir.empty())
    std::cerr << "outputs written to " << cfg.output_dir << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with an automatic stopping criterion"};
  app.require_subcommand(1);

  // run
  std::string run_config, run_output;
  auto* run = app.add_subcommand("run", "Run a replicated experiment");
  run->add_option("--config", run_config, "JSON config path")->required();
  run->add_option("--output-dir", run_output, "Override output directory");

  // calibrate-eta
  std::string eta_config;
  int eta_repeats = 0, eta_train = 0;
  auto* ceta = app.add_subcommand("calibrate-eta",
                                  "Calibrate the optimal-stop risk threshold");
  ceta->add_option("--config", eta_config, "JSON config path")->required();
  ceta->add_option("--repeats", eta_repeats, "Resample count override");
  ceta->add_option("--train-size", eta_train, "Training size override");

  // calibrate-threshold
  std::string thr_config, thr_criterion;
  std::pair<double, double> thr_range{0.0, 0.0};
  int thr_grid = 0;
  auto* cthr = app.add_subcommand("calibrate-threshold",
                                  "Calibrate a baseline stopping threshold");
  cthr->add_option("--config", thr_config, "JSON config path")->required();
  cthr->add_option("--criterion", thr_criterion,
                   "pac_bayes | cross_validation | max_variance | ground_truth")
      ->required();
  cthr->add_option("--range", thr_range, "Threshold range lo hi");
  cthr->add_option("--grid", thr_grid, "Grid point count override");

  // runstest
  std::string rt_input, rt_mode = "auto", rt_sided = "two";
  double rt_alpha = 0.001;
  int rt_cutoff = 30;
  auto* rt = app.add_subcommand(
      "runstest", "Runs test on newline-delimited reals (stdin by default)");
  rt->add_option("--input", rt_input, "Input file (default: stdin)");
  rt->add_option("--alpha", rt_alpha, "Significance level");
  rt->add_option("--mode", rt_mode, "exact | normal | auto");
  rt->add_option("--sided", rt_sided, "two | lower");
  rt->add_option("--exact-cutoff", rt_cutoff,
                 "Max length for exact mode under auto");

  // generate
  std::string gen_name, gen_output;
  int gen_n = 1000;
  std::uint64_t gen_seed = 1;
  double gen_beta = 400.0;
  std::pair<double, double> gen_range{-5.0, 15.0};
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  gen->add_option("--name", gen_name, "artificial | signwave")->required();
  gen->add_option("--n", gen_n, "Sample count");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--noise-precision", gen_beta,
                  "Observation noise precision (artificial)");
  gen->add_option("--range", gen_range, "Input range lo hi (artificial)");
  gen->add_option("--output", gen_output, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return run_experiment_cmd(run_config, run_output);
    if (ceta->parsed())
      return run_calibrate_eta(eta_config, eta_repeats, eta_train);
    if (cthr->parsed())
      return run_calibrate_threshold(thr_config, thr_criterion, thr_range,
                                     thr_grid);
    if (rt->parsed())
      return run_runstest(rt_input, rt_alpha, rt_mode, rt_sided, rt_cutoff);
    if (gen->parsed())
      return run_generate(gen_name, gen_n, gen_seed, gen_beta, gen_range,
                          gen_output);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const alstop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const alstop::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const alstop::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
