#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace alstop {

/// Rows of (input vector, scalar target) plus the standardization
/// transform that produced them. Immutable after construction; safe to
/// share across concurrent experiment replications.
struct LabeledDataset {
  Eigen::MatrixXd inputs;         // n x d, row per sample
  Eigen::VectorXd targets;        // n
  Eigen::VectorXd feature_means;  // d; zeros until standardized
  Eigen::VectorXd feature_sds;    // d; ones until standardized, 0 marks a
                                  // constant column
  double target_mean = 0.0;
  double target_sd = 1.0;
  bool standardized = false;

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
  Eigen::VectorXd input_row(int i) const { return inputs.row(i); }

  /// Subset by row indices; standardization metadata is carried over.
  LabeledDataset select(std::span<const int> rows) const;
};

/// Target column designator for load_table: header name or 0-based index.
using TargetColumn = std::variant<std::string, int>;

/// Parse a comma-delimited numeric table with one header row. The
/// designated column becomes the target, the remaining columns the input
/// features (in file order). Requires at least 2 data rows.
LabeledDataset load_table(const std::string& path, const TargetColumn& target);

/// Shift/scale every feature column and the target column to population
/// mean 0 and population sd 1, storing the transform. Constant columns map
/// to all-zeros (their stored sd is 0). Errors if already standardized.
LabeledDataset standardize(const LabeledDataset& ds);

/// Invert standardize() using the stored means/sds.
LabeledDataset destandardize(const LabeledDataset& ds);

/// Noiseless mean of the 1-D artificial benchmark function.
double artificial_mean(double x);

/// n samples with x ~ U(x_range), y = artificial_mean(x) + eps,
/// eps ~ N(0, 1/noise_precision). Deterministic given the seed.
LabeledDataset generate_artificial(int n, double noise_precision,
                                   std::pair<double, double> x_range,
                                   std::uint64_t seed);

/// Sign of sin(2*pi*x), with sign(0) mapped to +1.
double sign_wave_label(double x);

/// n samples with x ~ U[0, 1], y = sign_wave_label(x).
LabeledDataset generate_sign_wave(int n, std::uint64_t seed);

/// Disjoint uniform random partition; pool gets pool_size rows, test the
/// rest. Requires 1 <= pool_size < ds.size().
std::pair<LabeledDataset, LabeledDataset> split_pool(const LabeledDataset& ds,
                                                     int pool_size,
                                                     std::uint64_t seed);

}  // namespace alstop
