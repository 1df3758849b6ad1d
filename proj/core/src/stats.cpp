#include "mug/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "mug/error.hpp"

namespace mug::stats {

namespace {
constexpr double kProbFloor = 1e-15;
}

double log_loss(const Tensor& probs, std::span<const std::size_t> labels) {
  if (labels.size() != probs.rows()) throw ContractError("log_loss: one label per row required");
  if (labels.empty()) throw ContractError("log_loss of an empty set");
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double s = 0.0;
    for (double v : probs.row(r)) s += v;
    if (std::abs(s - 1.0) > 1e-6) throw ContractError("log_loss: row " + std::to_string(r) + " does not sum to 1");
    if (labels[r] >= probs.cols()) throw ContractError("log_loss: label " + std::to_string(labels[r]) + " out of range");
    total -= std::log(std::clamp(probs(r, labels[r]), kProbFloor, 1.0));
  }
  return total / static_cast<double>(labels.size());
}

std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw ContractError("argmax of an empty row");
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<std::size_t> argmax_rows(const Tensor& probs) {
  std::vector<std::size_t> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = argmax(probs.row(r));
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw ContractError("accuracy: length mismatch");
  if (truth.empty()) throw ContractError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double accuracy(const Tensor& probs, std::span<const std::size_t> truth) {
  const auto pred = argmax_rows(probs);
  return accuracy(pred, truth);
}

Orientation parse_orientation(const std::string& text) {
  if (text == "lower" || text == "lower_better" || text == "min") return Orientation::lower_better;
  if (text == "higher" || text == "higher_better" || text == "max") return Orientation::higher_better;
  throw ConfigError("unknown orientation '" + text + "' (expected lower or higher)");
}

std::string to_string(Orientation o) { return o == Orientation::lower_better ? "lower" : "higher"; }

void ResultsMatrix::check() const {
  if (values.rows() != methods.size() || values.cols() != datasets.size())
    throw ContractError("results matrix shape does not match its labels");
  if (!values.all_finite()) throw ContractError("results matrix has missing or non-finite cells");
}

std::vector<double> rank_column(std::span<const double> values, Orientation orientation) {
  const auto n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool lower = orientation == Orientation::lower_better;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lower ? values[a] < values[b] : values[a] > values[b];
  });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::vector<double> mean_ranks(const ResultsMatrix& m) {
  m.check();
  const auto k = m.method_count();
  const auto n = m.dataset_count();
  std::vector<double> total(k, 0.0);
  std::vector<double> column(k);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t i = 0; i < k; ++i) column[i] = m.values(i, d);
    const auto r = rank_column(column, m.orientation);
    for (std::size_t i = 0; i < k; ++i) total[i] += r[i];
  }
  if (n > 0)
    for (auto& v : total) v /= static_cast<double>(n);
  return total;
}

FriedmanResult friedman_test(const ResultsMatrix& m) {
  const auto k = m.method_count();
  const auto n = m.dataset_count();
  if (k < 2 || n < 2) throw ContractError("Friedman test needs at least 2 methods and 2 datasets");
  const auto mr = mean_ranks(m);
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  double sum_sq = 0.0;
  for (double r : mr) sum_sq += (r * nd) * (r * nd);
  double stat = 12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
  // Cancellation noise around the all-tied case.
  if (std::abs(stat) < 1e-9 * nd * (kd + 1.0)) stat = 0.0;
  stat = std::max(stat, 0.0);
  FriedmanResult out;
  out.statistic = stat;
  out.degrees_of_freedom = k - 1;
  out.p_value = boost::math::gamma_q((kd - 1.0) / 2.0, stat / 2.0);
  return out;
}

double nemenyi_q(std::size_t k, double alpha) {
  static constexpr std::array<double, 9> q05{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
  if (std::abs(alpha - 0.05) > 1e-12) throw DomainError("only alpha = 0.05 is supported for the Nemenyi test");
  if (k < 2 || k > 10) throw DomainError("Nemenyi critical values cover 2..10 methods, got " + std::to_string(k));
  return q05[k - 2];
}

double nemenyi_cd(std::size_t k, std::size_t n, double alpha) {
  if (n < 1) throw DomainError("Nemenyi critical difference needs at least one dataset");
  const double kd = static_cast<double>(k);
  return nemenyi_q(k, alpha) * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
}

std::vector<std::vector<std::size_t>> cd_grouping(std::span<const double> ranks, double cd) {
  const auto n = ranks.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
  std::vector<std::vector<std::size_t>> groups;
  std::size_t last_end = 0;
  bool have = false;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    while (j + 1 < n && ranks[order[j + 1]] - ranks[order[i]] <= cd + 1e-12) ++j;
    if (have && j <= last_end) continue;
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(j + 1));
    last_end = j;
    have = true;
  }
  return groups;
}

CDResult cd_analysis(const ResultsMatrix& m, double alpha) {
  CDResult out;
  out.methods = m.methods;
  out.mean_ranks = mean_ranks(m);
  out.friedman = friedman_test(m);
  out.alpha = alpha;
  out.critical_difference = nemenyi_cd(m.method_count(), m.dataset_count(), alpha);
  out.groups = cd_grouping(out.mean_ranks, out.critical_difference);
  return out;
}

ResultsMatrix minmax_normalize(const ResultsMatrix& m) {
  m.check();
  ResultsMatrix out = m;
  out.orientation = Orientation::higher_better;
  for (std::size_t d = 0; d < m.dataset_count(); ++d) {
    double lo = m.values(0, d), hi = m.values(0, d);
    for (std::size_t i = 1; i < m.method_count(); ++i) {
      lo = std::min(lo, m.values(i, d));
      hi = std::max(hi, m.values(i, d));
    }
    for (std::size_t i = 0; i < m.method_count(); ++i) {
      const double v = m.values(i, d);
      if (hi == lo) out.values(i, d) = 0.5;
      else if (m.orientation == Orientation::higher_better) out.values(i, d) = (v - lo) / (hi - lo);
      else out.values(i, d) = (hi - v) / (hi - lo);
    }
  }
  return out;
}

std::vector<double> method_means(const ResultsMatrix& m) {
  m.check();
  std::vector<double> out(m.method_count(), 0.0);
  for (std::size_t i = 0; i < m.method_count(); ++i) {
    for (double v : m.values.row(i)) out[i] += v;
    if (m.dataset_count()) out[i] /= static_cast<double>(m.dataset_count());
  }
  return out;
}

std::vector<bool> pareto_frontier(std::span<const ParetoPoint> points) {
  std::vector<bool> on(points.size(), true);
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t q = 0; q < points.size() && on[p]; ++q) {
      if (q == p) continue;
      const auto& a = points[q];
      const auto& b = points[p];
      const bool no_worse = a.cost <= b.cost && a.quality >= b.quality;
      const bool better = a.cost < b.cost || a.quality > b.quality;
      if (no_worse && better) on[p] = false;
    }
  }
  return on;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile of an empty list");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_summary(std::span<const double> values) {
  if (values.empty()) throw ContractError("box summary of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.min = v.front();
  b.max = v.back();
  b.q1 = quantile_sorted(v, 0.25);
  b.median = quantile_sorted(v, 0.5);
  b.q3 = quantile_sorted(v, 0.75);
  const double reach = 1.5 * (b.q3 - b.q1);
  b.lower_whisker = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= b.q1 - reach; });
  b.upper_whisker = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= b.q3 + reach; });
  // Interpolated quartiles can pass the nearest in-range datum.
  b.lower_whisker = std::min(b.lower_whisker, b.q1);
  b.upper_whisker = std::max(b.upper_whisker, b.q3);
  return b;
}

}  // namespace mug::stats
