#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace alstop {

/// Ordered {0,1} sequence with cached symbol counts.
struct BinarySequence {
  std::vector<std::uint8_t> bits;
  int t0 = 0;  // zeros
  int t1 = 0;  // ones

  static BinarySequence from_bits(std::vector<std::uint8_t> bits);
  int length() const { return t0 + t1; }
};

/// Median binarization: 1 where the value is >= median of the full list,
/// 0 otherwise. The median is the order statistic (mean of the two middle
/// values for even length) and is recomputed from scratch on every call.
BinarySequence binarize_by_median(std::span<const double> r_values);

/// Number of maximal constant blocks.
int count_runs(const BinarySequence& e);

/// Exact null distribution of the run count U for t0 zeros and t1 ones.
/// Probabilities are computed with exact integer binomials:
///   P(U = 2k)   = 2 C(t0-1, k-1) C(t1-1, k-1) / C(T, t0)
///   P(U = 2k+1) = [C(t0-1, k) C(t1-1, k-1) + C(t0-1, k-1) C(t1-1, k)]
///                 / C(T, t0).
struct RunsDistribution {
  int t0 = 0;
  int t1 = 0;
  std::vector<double> probs;  // probs[u - 2] = P(U = u), u in [2, T]

  int max_u() const { return t0 + t1; }
  double prob(int u) const;
  double lower_tail(int u) const;  // P(U <= u)
  double upper_tail(int u) const;  // P(U >= u)
  double mean() const;
};

RunsDistribution exact_runs_distribution(int t0, int t1);

/// Normal-approximation moments:
/// mu = 1 + 2 t0 t1 / T, sigma^2 = 2 t0 t1 (2 t0 t1 - T) / (T^2 (T - 1)).
struct RunsMoments {
  double mu;
  double sigma2;
};

RunsMoments runs_moments(int t0, int t1);

enum class RunsMode { kExact, kNormal };
enum class RunsSided { kTwo, kLower };

struct RunsTestReport {
  int n = 0;
  int t0 = 0;
  int t1 = 0;
  int u = 0;
  double mu = 0.0;
  double sigma2 = 0.0;
  double z = 0.0;
  double p_value = 0.0;
  bool reject_randomness = false;
  bool degenerate = false;  // one symbol absent; treated as maximal trend
  RunsMode mode = RunsMode::kNormal;
  RunsSided sided = RunsSided::kTwo;
};

/// Wald-Wolfowitz runs test at significance level alpha in (0, 0.5).
/// Exact mode draws the p-value from the enumatable null distribution
/// (two-sided: doubled smaller tail, capped at 1); normal mode from the
/// standard normal via Z = (U - mu)/sigma. A constant sequence yields a
/// degenerate report with reject_randomness = true.
RunsTestReport runs_test(const BinarySequence& e, double alpha, RunsMode mode,
                         RunsSided sided = RunsSided::kTwo);

/// Smallest p-value the test can produce for the given symbol counts
/// (attained at an extreme run count). Non-rejection is only informative
/// when this is below the significance level.
double min_attainable_p_value(int t0, int t1, RunsMode mode, RunsSided sided);

}  // namespace alstop
