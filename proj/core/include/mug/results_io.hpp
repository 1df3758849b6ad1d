#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mug/csv.hpp"
#include "mug/stats.hpp"

namespace mug::stats {

/// Long form has columns `method, dataset, metric, value` (metric optional);
/// wide form has a `method` column followed by one column per dataset.
/// Methods and datasets keep their first-appearance order. `metric` selects
/// rows of a long-form file and is required when it holds several metrics.
/// Throws ParseError on missing, duplicate or non-numeric cells.
ResultsMatrix parse_results(const csv::Table& table, Orientation orientation, const std::string& metric = "");
ResultsMatrix read_results(const std::filesystem::path& path, Orientation orientation,
                           const std::string& metric = "");

void write_long_results(std::ostream& out, const ResultsMatrix& m, const std::string& metric);
void write_wide_results(std::ostream& out, const ResultsMatrix& m);

/// `method,mean_rank,groups` with semicolon-separated 1-based group ids.
void write_rank_report(std::ostream& out, const CDResult& r);
/// `statistic,value` rows: methods, datasets, friedman_chi2, friedman_df,
/// friedman_p, alpha, critical_difference.
void write_cd_summary(std::ostream& out, const CDResult& r, std::size_t datasets);
/// `group,members` with members separated by semicolons in rank order.
void write_groups(std::ostream& out, const CDResult& r);

/// Reads `name_column, cost_column, quality_column` from a CSV.
std::vector<ParetoPoint> read_points(const std::filesystem::path& path, const std::string& name_column = "method",
                                     const std::string& cost_column = "cost",
                                     const std::string& quality_column = "quality");
/// `method,cost,quality,on_frontier`.
void write_pareto_report(std::ostream& out, const std::vector<ParetoPoint>& points, const std::vector<bool>& frontier);

/// `method,min,lower_whisker,q1,median,q3,upper_whisker,max`.
void write_box_stats(std::ostream& out, const std::vector<std::string>& names, const std::vector<BoxStats>& boxes);

}  // namespace mug::stats
