#include "alstop/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "alstop/errors.hpp"
#include "alstop/random.hpp"

namespace alstop {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& raw, int file_line, int column,
                  const std::string& header) {
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r'))
    --end;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw DataError("non-numeric cell '" + raw + "' at line " +
                    std::to_string(file_line) + ", column " +
                    std::to_string(column + 1) + " ('" + header + "')");
  }
  return value;
}

}  // namespace

LabeledDataset LabeledDataset::select(std::span<const int> rows) const {
  LabeledDataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
    out.targets(static_cast<Eigen::Index>(i)) = targets(rows[i]);
  }
  out.feature_means = feature_means;
  out.feature_sds = feature_sds;
  out.target_mean = target_mean;
  out.target_sd = target_sd;
  out.standardized = standardized;
  return out;
}

LabeledDataset load_table(const std::string& path,
                          const TargetColumn& target) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file '" + path + "'");
  auto headers = split_csv_line(line);
  for (auto& h : headers) {
    while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    while (!h.empty() && h.front() == ' ') h.erase(h.begin());
  }
  const int ncols = static_cast<int>(headers.size());
  if (ncols < 2)
    throw DataError("need at least two columns in '" + path + "'");

  int target_idx = -1;
  if (std::holds_alternative<int>(target)) {
    target_idx = std::get<int>(target);
    if (target_idx < 0 || target_idx >= ncols)
      throw DataError("target column index " + std::to_string(target_idx) +
                      " out of range for " + std::to_string(ncols) +
                      " columns");
  } else {
    const auto& name = std::get<std::string>(target);
    const auto it = std::find(headers.begin(), headers.end(), name);
    if (it == headers.end())
      throw DataError("target column '" + name + "' not found in header");
    target_idx = static_cast<int>(it - headers.begin());
  }

  std::vector<std::vector<double>> rows;
  int file_line = 1;
  while (std::getline(in, line)) {
    ++file_line;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != ncols)
      throw DataError("line " + std::to_string(file_line) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(ncols));
    std::vector<double> row(ncols);
    for (int c = 0; c < ncols; ++c)
      row[c] = parse_cell(cells[c], file_line, c, headers[c]);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2)
    throw DataError("'" + path + "' has " + std::to_string(rows.size()) +
                    " data rows; need at least 2");

  LabeledDataset ds;
  const int n = static_cast<int>(rows.size());
  const int d = ncols - 1;
  ds.inputs.resize(n, d);
  ds.targets.resize(n);
  for (int i = 0; i < n; ++i) {
    int k = 0;
    for (int c = 0; c < ncols; ++c) {
      if (c == target_idx)
        ds.targets(i) = rows[i][c];
      else
        ds.inputs(i, k++) = rows[i][c];
    }
  }
  ds.feature_means = Eigen::VectorXd::Zero(d);
  ds.feature_sds = Eigen::VectorXd::Ones(d);
  return ds;
}

namespace {

// Population sd; returns 0 for (numerically) constant columns.
std::pair<double, double> column_moments(const Eigen::VectorXd& col) {
  const double mean = col.mean();
  const double var = (col.array() - mean).square().mean();
  const double scale = std::max(1.0, std::abs(mean));
  double sd = std::sqrt(var);
  if (sd < 1e-13 * scale) sd = 0.0;
  return {mean, sd};
}

}  // namespace

LabeledDataset standardize(const LabeledDataset& ds) {
  if (ds.standardized)
    throw ConfigError("dataset is already standardized");
  if (ds.size() < 1) throw ConfigError("cannot standardize an empty dataset");

  LabeledDataset out = ds;
  const int d = ds.dim();
  out.feature_means.resize(d);
  out.feature_sds.resize(d);
  for (int j = 0; j < d; ++j) {
    const auto [mean, sd] = column_moments(ds.inputs.col(j));
    out.feature_means(j) = mean;
    out.feature_sds(j) = sd;
    if (sd == 0.0)
      out.inputs.col(j).setZero();
    else
      out.inputs.col(j) = (ds.inputs.col(j).array() - mean) / sd;
  }
  const auto [tmean, tsd] = column_moments(ds.targets);
  out.target_mean = tmean;
  out.target_sd = tsd;
  if (tsd == 0.0)
    out.targets.setZero();
  else
    out.targets = (ds.targets.array() - tmean) / tsd;
  out.standardized = true;
  return out;
}

LabeledDataset destandardize(const LabeledDataset& ds) {
  if (!ds.standardized)
    throw ConfigError("dataset is not standardized");
  LabeledDataset out = ds;
  for (int j = 0; j < ds.dim(); ++j) {
    out.inputs.col(j) =
        (ds.inputs.col(j).array() * ds.feature_sds(j)) + ds.feature_means(j);
  }
  out.targets = (ds.targets.array() * ds.target_sd) + ds.target_mean;
  out.feature_means.setZero();
  out.feature_sds.setOnes();
  out.target_mean = 0.0;
  out.target_sd = 1.0;
  out.standardized = false;
  return out;
}

double artificial_mean(double x) {
  return std::exp(-(x - 2.0) * (x - 2.0) / 2.0) +
         std::exp(-(x - 6.0) * (x - 6.0) / 10.0) + 1.0 / (x * x + 1.0);
}

LabeledDataset generate_artificial(int n, double noise_precision,
                                   std::pair<double, double> x_range,
                                   std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate_artificial: n must be >= 1");
  if (!(noise_precision > 0.0))
    throw ConfigError("generate_artificial: noise_precision must be > 0");
  Rng rng(seed);
  const double noise_sd = 1.0 / std::sqrt(noise_precision);
  LabeledDataset ds;
  ds.inputs.resize(n, 1);
  ds.targets.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(x_range.first, x_range.second);
    ds.inputs(i, 0) = x;
    ds.targets(i) = artificial_mean(x) + noise_sd * rng.gaussian();
  }
  ds.feature_means = Eigen::VectorXd::Zero(1);
  ds.feature_sds = Eigen::VectorXd::Ones(1);
  return ds;
}

double sign_wave_label(double x) {
  const double s = std::sin(2.0 * std::numbers::pi * x);
  return s < 0.0 ? -1.0 : 1.0;
}

LabeledDataset generate_sign_wave(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate_sign_wave: n must be >= 1");
  Rng rng(seed);
  LabeledDataset ds;
  ds.inputs.resize(n, 1);
  ds.targets.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform01();
    ds.inputs(i, 0) = x;
    ds.targets(i) = sign_wave_label(x);
  }
  ds.feature_means = Eigen::VectorXd::Zero(1);
  ds.feature_sds = Eigen::VectorXd::Ones(1);
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_pool(const LabeledDataset& ds,
                                                     int pool_size,
                                                     std::uint64_t seed) {
  const int n = ds.size();
  if (pool_size < 1 || pool_size >= n)
    throw ConfigError("split_pool: pool_size " + std::to_string(pool_size) +
                      " out of range for " + std::to_string(n) + " rows");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  const std::span<const int> pool_rows(idx.data(), static_cast<std::size_t>(pool_size));
  const std::span<const int> test_rows(idx.data() + pool_size,
                                       static_cast<std::size_t>(n - pool_size));
  return {ds.select(pool_rows), ds.select(test_rows)};
}

}  // namespace alstop
