#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "mug/cd_diagram.hpp"
#include "mug/error.hpp"
#include "mug/results_io.hpp"
#include "mug/rng.hpp"
#include "mug/stats.hpp"

using namespace mug;
using namespace mug::stats;

namespace {

const std::filesystem::path kData{MUG_DATA_DIR};

ResultsMatrix matrix(std::vector<std::vector<double>> rows, Orientation o = Orientation::lower_better) {
  ResultsMatrix m;
  m.orientation = o;
  m.values = Tensor(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.methods.push_back("m" + std::to_string(i));
    for (std::size_t d = 0; d < rows[i].size(); ++d) m.values(i, d) = rows[i][d];
  }
  for (std::size_t d = 0; d < rows.front().size(); ++d) m.datasets.push_back("d" + std::to_string(d));
  return m;
}

std::vector<std::string> names_of(const CDResult& r, const std::vector<std::size_t>& group) {
  std::vector<std::string> out;
  for (auto i : group) out.push_back(r.methods[i]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Metrics, LogLossExamples) {
  const std::vector<std::size_t> y{0, 1};
  EXPECT_NEAR(log_loss(Tensor{{0.8, 0.2}, {0.4, 0.6}}, y), -(std::log(0.8) + std::log(0.6)) / 2.0, 1e-15);
  EXPECT_NEAR(log_loss(Tensor{{0.0, 1.0}, {0.0, 1.0}}, y), -std::log(1e-15) / 2.0, 1e-9);
  EXPECT_THROW(log_loss(Tensor{{0.7, 0.2}, {0.4, 0.6}}, y), ContractError);
}

TEST(Metrics, AccuracyAndArgmaxTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.4, 0.4, 0.2}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.45, 0.45}), 1u);
  const std::vector<std::size_t> y{0, 2, 1};
  EXPECT_NEAR(accuracy(Tensor{{0.5, 0.5, 0.0}, {0.1, 0.2, 0.7}, {0.3, 0.3, 0.4}}, y), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(accuracy(std::vector<std::size_t>{}, std::vector<std::size_t>{}), ContractError);
}

TEST(Ranks, TiesShareAveragePosition) {
  EXPECT_EQ(rank_column(std::vector<double>{0.2, 0.2, 0.5}, Orientation::lower_better),
            (std::vector<double>{1.5, 1.5, 3.0}));
  EXPECT_EQ(rank_column(std::vector<double>{0.2, 0.2, 0.5}, Orientation::higher_better),
            (std::vector<double>{2.5, 2.5, 1.0}));
  const auto all = rank_column(std::vector<double>(5, 1.0), Orientation::lower_better);
  for (double r : all) EXPECT_EQ(r, 3.0);
}

TEST(Ranks, PropertySumAndRange) {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng.below(9);
    std::vector<double> v(k);
    for (auto& x : v) x = static_cast<double>(rng.below(4));
    const auto r = rank_column(v, Orientation::lower_better);
    double s = 0.0;
    for (double x : r) {
      EXPECT_GE(x, 1.0);
      EXPECT_LE(x, static_cast<double>(k));
      s += x;
    }
    EXPECT_DOUBLE_EQ(s, static_cast<double>(k * (k + 1)) / 2.0);
  }
}

TEST(Ranks, InvariantUnderMonotoneTransform) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> rows(5, std::vector<double>(6));
    for (auto& r : rows)
      for (auto& x : r) x = rng.uniform();
    auto a = matrix(rows);
    auto b = a;
    for (auto& x : b.values.values()) x = std::exp(3.0 * x) - 7.0;
    EXPECT_EQ(mean_ranks(a), mean_ranks(b));
  }
}

TEST(Friedman, PerfectAgreement) {
  // Same order on every dataset: ranks 1..K, χ² = N(K−1).
  const auto f = friedman_test(matrix({{1, 1, 1, 1}, {2, 2, 2, 2}, {3, 3, 3, 3}}));
  EXPECT_NEAR(f.statistic, 8.0, 1e-12);
  EXPECT_EQ(f.degrees_of_freedom, 2u);
  EXPECT_NEAR(f.p_value, std::exp(-4.0), 1e-10);
}

TEST(Friedman, AllTiedGivesZero) {
  const auto f = friedman_test(matrix({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}));
  EXPECT_NEAR(f.statistic, 0.0, 1e-12);
  EXPECT_NEAR(f.p_value, 1.0, 1e-12);
}

TEST(Nemenyi, KnownValues) {
  EXPECT_NEAR(nemenyi_cd(3, 4), 2.343 * std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(nemenyi_cd(3, 4), 1.657, 1e-3);
  EXPECT_NEAR(nemenyi_cd(9, 8), 4.2476, 1e-4);
  EXPECT_NEAR(nemenyi_cd(5, 40) / nemenyi_cd(5, 10), 0.5, 1e-12);
  EXPECT_THROW(nemenyi_cd(11, 4), DomainError);
  EXPECT_THROW(nemenyi_cd(3, 4, 0.01), DomainError);
}

TEST(Grouping, Examples) {
  const auto g = cd_grouping(std::vector<double>{1.0, 3.0, 8.0}, 2.5);
  ASSERT_GE(g.size(), 1u);
  EXPECT_EQ(g[0], (std::vector<std::size_t>{0, 1}));
  for (const auto& grp : g) EXPECT_FALSE(std::count(grp.begin(), grp.end(), 0) && std::count(grp.begin(), grp.end(), 2));
  const auto one = cd_grouping(std::vector<double>{4.0, 1.0, 2.5, 3.0}, 3.0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], (std::vector<std::size_t>{1, 2, 3, 0}));
}

TEST(Grouping, GroupsRespectCdAndAreMaximal) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + rng.below(8);
    std::vector<double> ranks(k);
    for (auto& r : ranks) r = 1.0 + rng.uniform() * static_cast<double>(k - 1);
    const double cd = rng.uniform() * 3.0;
    for (const auto& grp : cd_grouping(ranks, cd)) {
      double lo = 1e9, hi = -1e9;
      for (auto i : grp) lo = std::min(lo, ranks[i]), hi = std::max(hi, ranks[i]);
      EXPECT_LE(hi - lo, cd + 1e-12);
      // No outside method fits between the group's extremes plus the CD.
      for (std::size_t j = 0; j < k; ++j)
        if (std::find(grp.begin(), grp.end(), j) == grp.end())
          EXPECT_GT(std::max(hi, ranks[j]) - std::min(lo, ranks[j]), cd - 1e-12);
    }
  }
}

TEST(Normalize, MinMaxExamples) {
  const auto n = minmax_normalize(matrix({{0.1, 5.0}, {0.3, 5.0}, {0.2, 5.0}}));
  EXPECT_EQ(n.orientation, Orientation::higher_better);
  EXPECT_NEAR(n.values(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(n.values(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(n.values(2, 0), 0.5, 1e-15);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(n.values(i, 1), 0.5);
  const auto h = minmax_normalize(matrix({{0.9}, {0.5}}, Orientation::higher_better));
  EXPECT_EQ(h.values(0, 0), 1.0);
  EXPECT_EQ(h.values(1, 0), 0.0);
}

TEST(Pareto, Examples) {
  const std::vector<ParetoPoint> chain{{"a", 1, 1}, {"b", 2, 2}, {"c", 3, 3}};
  EXPECT_EQ(pareto_frontier(chain), (std::vector<bool>{true, true, true}));
  const std::vector<ParetoPoint> dominated{{"a", 1, 3}, {"b", 2, 2}, {"c", 1, 3}};
  EXPECT_EQ(pareto_frontier(dominated), (std::vector<bool>{true, false, true}));
  const std::vector<ParetoPoint> single{{"a", 5, 0}};
  EXPECT_EQ(pareto_frontier(single), std::vector<bool>{true});
}

TEST(Pareto, FrontierPointsAreMutuallyNonDominating) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<ParetoPoint> pts(1 + rng.below(12));
    for (auto& p : pts) p = {"x", static_cast<double>(rng.below(5)), static_cast<double>(rng.below(5))};
    const auto f = pareto_frontier(pts);
    EXPECT_TRUE(std::any_of(f.begin(), f.end(), [](bool b) { return b; }));
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const bool dominates = pts[j].cost <= pts[i].cost && pts[j].quality >= pts[i].quality &&
                               (pts[j].cost < pts[i].cost || pts[j].quality > pts[i].quality);
        if (dominates) EXPECT_FALSE(f[i]);
      }
  }
}

TEST(BoxStats, OneToFive) {
  const auto b = box_summary(std::vector<double>{5, 1, 4, 2, 3});
  EXPECT_EQ(b.min, 1.0);
  EXPECT_EQ(b.q1, 2.0);
  EXPECT_EQ(b.median, 3.0);
  EXPECT_EQ(b.q3, 4.0);
  EXPECT_EQ(b.max, 5.0);
  EXPECT_EQ(b.lower_whisker, 1.0);
  EXPECT_EQ(b.upper_whisker, 5.0);
}

TEST(BoxStats, OutlierBeyondWhisker) {
  const auto b = box_summary(std::vector<double>{1, 2, 3, 4, 100});
  EXPECT_EQ(b.upper_whisker, 4.0);
  EXPECT_EQ(b.max, 100.0);
}

TEST(BoxStats, OrderingOnRandomLists) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + rng.below(30));
    for (auto& x : v) x = rng.normal() * 10.0;
    const auto b = box_summary(v);
    EXPECT_LE(b.min, b.lower_whisker);
    EXPECT_LE(b.lower_whisker, b.q1);
    EXPECT_LE(b.q1, b.median);
    EXPECT_LE(b.median, b.q3);
    EXPECT_LE(b.q3, b.upper_whisker);
    EXPECT_LE(b.upper_whisker, b.max);
  }
}

TEST(BoxStats, ConstantAndEmpty) {
  const auto b = box_summary(std::vector<double>(7, 2.5));
  for (double v : {b.min, b.lower_whisker, b.q1, b.median, b.q3, b.upper_whisker, b.max}) EXPECT_EQ(v, 2.5);
  EXPECT_THROW(box_summary(std::vector<double>{}), ContractError);
}

TEST(ResultsIO, LongAndWideRoundTrip) {
  const auto m = matrix({{0.1, 0.2}, {0.3, 0.05}});
  std::ostringstream lo, wi;
  write_long_results(lo, m, "log_loss");
  write_wide_results(wi, m);
  std::istringstream lin(lo.str()), win(wi.str());
  const auto a = parse_results(csv::read(lin), Orientation::lower_better);
  const auto b = parse_results(csv::read(win), Orientation::lower_better);
  EXPECT_EQ(a.methods, m.methods);
  EXPECT_EQ(a.datasets, m.datasets);
  EXPECT_EQ(a.values, m.values);
  EXPECT_EQ(b.values, m.values);
}

TEST(ResultsIO, MissingAndDuplicateCellsAreParseErrors) {
  std::istringstream missing("method,dataset,value\na,x,1\na,y,2\nb,x,3\n");
  EXPECT_THROW(parse_results(csv::read(missing), Orientation::lower_better), ParseError);
  std::istringstream dup("method,dataset,value\na,x,1\na,x,2\n");
  EXPECT_THROW(parse_results(csv::read(dup), Orientation::lower_better), ParseError);
  std::istringstream text("method,x\na,abc\n");
  EXPECT_THROW(parse_results(csv::read(text), Orientation::lower_better), ParseError);
}

TEST(Benchmark, LogLossReference) {
  const auto m = read_results(kData / "benchmark_logloss.csv", Orientation::lower_better);
  const auto r = cd_analysis(m);
  EXPECT_NEAR(r.friedman.statistic, 48.0, 1e-9);
  EXPECT_NEAR(r.critical_difference, 4.2476, 1e-4);
  const std::vector<std::pair<std::string, double>> expected{
      {"AutoGluon", 1.375}, {"MuGNet", 1.875}, {"tabMLP", 3.75}, {"GBM", 4.375}, {"AutoMM", 5.0},
      {"RoBERTa", 6.125}, {"Electra", 7.25}, {"ViT", 7.5}, {"Swin", 7.75}};
  for (const auto& [name, rank] : expected) {
    const auto it = std::find(r.methods.begin(), r.methods.end(), name);
    ASSERT_NE(it, r.methods.end()) << name;
    EXPECT_NEAR(r.mean_ranks[static_cast<std::size_t>(it - r.methods.begin())], rank, 1e-12) << name;
  }
  ASSERT_EQ(r.groups.size(), 2u);
  EXPECT_EQ(names_of(r, r.groups[0]),
            (std::vector<std::string>{"AutoGluon", "AutoMM", "GBM", "MuGNet", "tabMLP"}));
  EXPECT_EQ(names_of(r, r.groups[1]),
            (std::vector<std::string>{"AutoMM", "Electra", "GBM", "RoBERTa", "Swin", "ViT", "tabMLP"}));
}

TEST(Benchmark, AccuracyFriedman) {
  const auto m = read_results(kData / "benchmark_accuracy.csv", Orientation::higher_better);
  EXPECT_NEAR(friedman_test(m).statistic, 42.5667, 1e-4);
}

TEST(Benchmark, CostQualityFrontier) {
  const auto pts = read_points(kData / "benchmark_cost_quality.csv");
  const auto f = pareto_frontier(pts);
  std::vector<std::string> on;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (f[i]) on.push_back(pts[i].name);
  std::sort(on.begin(), on.end());
  EXPECT_EQ(on, (std::vector<std::string>{"GBM", "MuGNet", "tabMLP"}));
}

TEST(CdDiagram, SvgContainsLabelsAndCd) {
  const auto r = cd_analysis(read_results(kData / "benchmark_logloss.csv", Orientation::lower_better));
  std::ostringstream svg;
  write_cd_diagram(svg, r);
  const auto s = svg.str();
  EXPECT_NE(s.find("<svg"), std::string::npos);
  EXPECT_NE(s.find("CD=4.2476"), std::string::npos);
  for (const auto& name : r.methods) EXPECT_NE(s.find(name), std::string::npos) << name;
  EXPECT_NE(s.find("</svg>"), std::string::npos);
}
