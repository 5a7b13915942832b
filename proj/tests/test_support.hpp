#pragma once

// Shared helpers for the test suites: independent oracles and random
// instance generators. Everything here is deliberately implemented without
// reusing the library code paths under test.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "alstop/dataset.hpp"
#include "alstop/gp.hpp"
#include "alstop/random.hpp"

namespace test_support {

/// Exhaustive enumeration of the null runs-count distribution: every
/// arrangement of t0 zeros and t1 ones is equally likely. Returns counts
/// per run count u; the total is C(t0+t1, t0).
inline std::map<int, long long> enumerate_run_counts(int t0, int t1) {
  std::vector<int> bits(t0, 0);
  bits.insert(bits.end(), t1, 1);
  std::sort(bits.begin(), bits.end());
  std::map<int, long long> counts;
  do {
    int runs = 1;
    for (std::size_t i = 1; i < bits.size(); ++i)
      if (bits[i] != bits[i - 1]) ++runs;
    ++counts[runs];
  } while (std::next_permutation(bits.begin(), bits.end()));
  return counts;
}

inline long long binomial_ll(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long result = 1;
  k = std::min(k, n - k);
  for (int i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    }
  return result;
}

/// Small random GP regression instance for oracle tests.
struct GPInstance {
  alstop::KernelParams params;
  alstop::LabeledDataset train;  // t points
  Eigen::VectorXd x_new;
  double y_new;
};

/// Training inputs are drawn with a minimum separation so the joint
/// posterior covariances stay well conditioned for the KL oracles.
inline GPInstance random_gp_instance(alstop::Rng& rng, int max_t = 8,
                                     int max_dim = 2) {
  GPInstance inst;
  inst.params.length_scale = rng.uniform(0.4, 1.2);
  inst.params.noise_precision = rng.uniform(0.5, 5.0);
  const int t = 1 + static_cast<int>(rng.below(max_t));
  const int d = 1 + static_cast<int>(rng.below(max_dim));
  const double sep = 0.25 * inst.params.length_scale;

  std::vector<Eigen::VectorXd> points;
  auto draw_point = [&]() {
    while (true) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x(j) = rng.uniform(-4.0, 4.0);
      bool ok = true;
      for (const auto& p : points)
        if ((p - x).norm() < sep) ok = false;
      if (ok) return x;
    }
  };

  inst.train.inputs.resize(t, d);
  inst.train.targets.resize(t);
  for (int i = 0; i < t; ++i) {
    const auto x = draw_point();
    points.push_back(x);
    inst.train.inputs.row(i) = x;
    inst.train.targets(i) = rng.gaussian();
  }
  inst.x_new = draw_point();
  points.push_back(inst.x_new);
  inst.y_new = rng.gaussian();
  return inst;
}

/// Extra query points for the chain-rule test, separated from the
/// instance's own points.
inline Eigen::MatrixXd random_extra_points(alstop::Rng& rng,
                                           const GPInstance& inst, int m) {
  const int d = static_cast<int>(inst.train.inputs.cols());
  const double sep = 0.25 * inst.params.length_scale;
  std::vector<Eigen::VectorXd> points;
  for (int i = 0; i < inst.train.size(); ++i)
    points.push_back(inst.train.inputs.row(i));
  points.push_back(inst.x_new);
  Eigen::MatrixXd extras(m, d);
  for (int k = 0; k < m; ++k) {
    while (true) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x(j) = rng.uniform(-4.0, 4.0);
      bool ok = true;
      for (const auto& p : points)
        if ((p - x).norm() < sep) ok = false;
      if (ok) {
        points.push_back(x);
        extras.row(k) = x;
        break;
      }
    }
  }
  return extras;
}

/// Append one labeled row.
inline alstop::LabeledDataset augment(const alstop::LabeledDataset& ds,
                                      const Eigen::VectorXd& x, double y) {
  alstop::LabeledDataset out = ds;
  out.inputs.conservativeResize(ds.size() + 1, Eigen::NoChange);
  out.inputs.row(ds.size()) = x;
  out.targets.conservativeResize(ds.size() + 1);
  out.targets(ds.size()) = y;
  return out;
}

/// Draw targets from the GP prior with observation noise:
/// y ~ N(0, K + (1/beta) I).
inline alstop::LabeledDataset sample_from_prior(
    const alstop::KernelParams& params, const Eigen::MatrixXd& X,
    alstop::Rng& rng) {
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd K = alstop::kernel_matrix(params, X, X);
  K.diagonal().array() += 1e-10;
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(K).matrixL();
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.gaussian();
  Eigen::VectorXd f = L * z;
  alstop::LabeledDataset ds;
  ds.inputs = X;
  ds.targets.resize(n);
  const double noise_sd = 1.0 / std::sqrt(params.noise_precision);
  for (int i = 0; i < n; ++i)
    ds.targets(i) = f(i) + noise_sd * rng.gaussian();
  return ds;
}

}  // namespace test_support
