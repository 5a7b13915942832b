#include <benchmark/benchmark.h>

#include <numeric>

#include "alstop/dataset.hpp"
#include "alstop/gp.hpp"

namespace {

alstop::LabeledDataset make_data(int n, std::uint64_t seed) {
  return alstop::standardize(
      alstop::generate_artificial(n, 400.0, {-5.0, 15.0}, seed));
}

const alstop::KernelParams kParams{0.3, 20.0};

void BM_FitPosterior(benchmark::State& state) {
  const auto data = make_data(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(alstop::fit_posterior(data, kParams));
  }
}
BENCHMARK(BM_FitPosterior)->Arg(64)->Arg(128)->Arg(256);

void BM_UpdatePosterior(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto data = make_data(n + 1, 2);
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  const auto base = alstop::fit_posterior(data.select(rows), kParams);
  const Eigen::VectorXd x_new = data.input_row(n);
  const double y_new = data.targets(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(alstop::update_posterior(base, x_new, y_new));
  }
}
BENCHMARK(BM_UpdatePosterior)->Arg(64)->Arg(128)->Arg(256);

void BM_PredictPointwise(benchmark::State& state) {
  const auto data = make_data(128, 3);
  const auto post = alstop::fit_posterior(data, kParams);
  const auto queries = make_data(static_cast<int>(state.range(0)), 4).inputs;
  for (auto _ : state) {
    benchmark::DoNotOptimize(post.predict(queries));
  }
}
BENCHMARK(BM_PredictPointwise)->Arg(100)->Arg(1000);

}  // namespace
