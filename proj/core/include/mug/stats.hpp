#pragma once

#include <span>
#include <string>
#include <vector>

#include "mug/tensor.hpp"

namespace mug::stats {

// Per-sample metrics.

/// Mean −log(max(p[label], 1e-15)). Rows must sum to 1 within 1e-6.
double log_loss(const Tensor& probs, std::span<const std::size_t> labels);
/// First index of the row maximum.
std::size_t argmax(std::span<const double> row);
std::vector<std::size_t> argmax_rows(const Tensor& probs);
/// Fraction of exact matches; throws ContractError on empty or unequal input.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);
double accuracy(const Tensor& probs, std::span<const std::size_t> truth);

// Cross-dataset statistics.

enum class Orientation { lower_better, higher_better };
/// Accepts lower/lower_better/min and higher/higher_better/max.
Orientation parse_orientation(const std::string& text);
std::string to_string(Orientation o);

/// values(method, dataset).
struct ResultsMatrix {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  Tensor values;
  Orientation orientation = Orientation::lower_better;

  std::size_t method_count() const noexcept { return methods.size(); }
  std::size_t dataset_count() const noexcept { return datasets.size(); }
  /// Throws ContractError on shape disagreement or non-finite cells.
  void check() const;
};

/// Ranks 1..n for one dataset column; ties share the average position.
std::vector<double> rank_column(std::span<const double> values, Orientation orientation);
std::vector<double> mean_ranks(const ResultsMatrix& m);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t degrees_of_freedom = 0;
};
/// Rank-sum form with a chi-square upper tail on K−1 degrees of freedom.
/// Needs K ≥ 2 and N ≥ 2.
FriedmanResult friedman_test(const ResultsMatrix& m);

/// Studentized-range constant for alpha = 0.05, 2 ≤ K ≤ 10.
double nemenyi_q(std::size_t k, double alpha = 0.05);
/// q·√(K(K+1)/(6N)). Throws DomainError for unsupported K or alpha.
double nemenyi_cd(std::size_t k, std::size_t n, double alpha = 0.05);

/// Maximal runs of methods (sorted by rank, ties by index) whose rank spread
/// is within `cd`. Runs contained in an earlier run are dropped. Each group
/// lists method indices in rank order.
std::vector<std::vector<std::size_t>> cd_grouping(std::span<const double> ranks, double cd);

struct CDResult {
  std::vector<std::string> methods;
  std::vector<double> mean_ranks;
  FriedmanResult friedman;
  double alpha = 0.05;
  double critical_difference = 0.0;
  std::vector<std::vector<std::size_t>> groups;
};
CDResult cd_analysis(const ResultsMatrix& m, double alpha = 0.05);

/// Per dataset: best → 1, worst → 0, linear in between; a constant column
/// maps to 0.5. The result is higher_better.
ResultsMatrix minmax_normalize(const ResultsMatrix& m);
/// Row means of a matrix.
std::vector<double> method_means(const ResultsMatrix& m);

struct ParetoPoint {
  std::string name;
  double cost = 0.0;
  double quality = 0.0;
};
/// Flags points that no other point dominates (cost ≤, quality ≥, one strict).
std::vector<bool> pareto_frontier(std::span<const ParetoPoint> points);

struct BoxStats {
  double min = 0.0;
  double lower_whisker = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double upper_whisker = 0.0;
  double max = 0.0;
};
/// Linear-interpolation quartiles; whiskers reach the most extreme data within
/// 1.5·IQR of the quartiles. Throws ContractError on empty input.
BoxStats box_summary(std::span<const double> values);
/// Linear-interpolated quantile of already-sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace mug::stats
