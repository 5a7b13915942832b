#include <benchmark/benchmark.h>

#include <numeric>

#include "alstop/bounds.hpp"
#include "alstop/dataset.hpp"
#include "alstop/gp.hpp"

namespace {

const alstop::KernelParams kParams{0.3, 20.0};

// One-step bound evaluation given the current posterior: a single
// predictive query plus the closed form.
void BM_SequentialKL(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto data = alstop::standardize(
      alstop::generate_artificial(n + 1, 400.0, {-5.0, 15.0}, 5));
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const auto post = alstop::fit_posterior(data.select(rows), kParams);
  const Eigen::VectorXd x_new = data.input_row(n);
  const double y_new = data.targets(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(alstop::sequential_kl(post, x_new, y_new));
  }
}
BENCHMARK(BM_SequentialKL)->Arg(32)->Arg(128)->Arg(512);

void BM_GaussianKL(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const auto data = alstop::standardize(
      alstop::generate_artificial(dim + 8, 400.0, {-5.0, 15.0}, 6));
  std::vector<int> rows(dim);
  std::iota(rows.begin(), rows.end(), 0);
  const auto train = data.select(rows);
  const auto post = alstop::fit_posterior(train, kParams);
  const auto joint = post.predict_joint(train.inputs);
  Eigen::MatrixXd prior_cov =
      alstop::kernel_matrix(kParams, train.inputs, train.inputs);
  prior_cov.diagonal().array() += 0.01;
  Eigen::MatrixXd post_cov = joint.covariance;
  post_cov.diagonal().array() += 0.01;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        alstop::gaussian_kl(joint.mean, post_cov, zero, prior_cov));
  }
}
BENCHMARK(BM_GaussianKL)->Arg(16)->Arg(64)->Arg(128);

void BM_EmpiricalRisk(benchmark::State& state) {
  const auto data = alstop::standardize(
      alstop::generate_artificial(1000, 400.0, {-5.0, 15.0}, 7));
  const auto [pool, test] = alstop::split_pool(data, 50, 8);
  const auto post = alstop::fit_posterior(pool, kParams);
  for (auto _ : state) {
    benchmark::DoNotOptimize(alstop::empirical_expected_risk(post, test));
  }
}
BENCHMARK(BM_EmpiricalRisk);

}  // namespace
