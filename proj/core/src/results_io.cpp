#include "mug/results_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

#include "mug/error.hpp"

namespace mug::stats {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ContractError("cannot format number");
  return {buf, ptr};
}

double parse_number(const std::string& text, std::size_t row) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data() + b, text.data() + e, v);
  if (b == e || ec != std::errc{} || ptr != text.data() + e || !std::isfinite(v))
    throw ParseError("expected a number, got '" + text + "'", row);
  return v;
}

std::size_t index_of(std::vector<std::string>& names, std::map<std::string, std::size_t>& index,
                     const std::string& name) {
  auto [it, inserted] = index.emplace(name, names.size());
  if (inserted) names.push_back(name);
  return it->second;
}

}  // namespace

ResultsMatrix parse_results(const csv::Table& table, Orientation orientation, const std::string& metric) {
  const auto c_method = table.column("method");
  if (c_method == csv::Table::npos) throw ParseError("results file needs a 'method' column");
  const auto c_dataset = table.column("dataset");
  const auto c_value = table.column("value");
  ResultsMatrix m;
  m.orientation = orientation;

  if (c_dataset != csv::Table::npos && c_value != csv::Table::npos) {
    const auto c_metric = table.column("metric");
    if (c_metric != csv::Table::npos && metric.empty()) {
      std::string first;
      for (const auto& r : table.rows) {
        if (first.empty()) first = r.fields[c_metric];
        else if (r.fields[c_metric] != first)
          throw ConfigError("results file holds several metrics; choose one with --metric");
      }
    }
    std::map<std::string, std::size_t> mi, di;
    std::map<std::pair<std::size_t, std::size_t>, double> cells;
    std::size_t row = 0;
    for (const auto& r : table.rows) {
      ++row;
      if (c_metric != csv::Table::npos && !metric.empty() && r.fields[c_metric] != metric) continue;
      const auto i = index_of(m.methods, mi, r.fields[c_method]);
      const auto d = index_of(m.datasets, di, r.fields[c_dataset]);
      if (!cells.emplace(std::pair{i, d}, parse_number(r.fields[c_value], row)).second)
        throw ParseError("duplicate result for " + r.fields[c_method] + " on " + r.fields[c_dataset], row);
    }
    if (m.methods.empty()) throw ParseError("no results" + (metric.empty() ? std::string() : " for metric '" + metric + "'"));
    m.values = Tensor(m.methods.size(), m.datasets.size(), NAN);
    for (const auto& [key, v] : cells) m.values(key.first, key.second) = v;
    for (std::size_t i = 0; i < m.methods.size(); ++i)
      for (std::size_t d = 0; d < m.datasets.size(); ++d)
        if (std::isnan(m.values(i, d)))
          throw ParseError("missing result for " + m.methods[i] + " on " + m.datasets[d]);
    return m;
  }

  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != c_method) m.datasets.push_back(table.header[c]);
  if (m.datasets.empty()) throw ParseError("wide results file has no dataset columns");
  std::map<std::string, std::size_t> mi;
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  for (const auto& r : table.rows) {
    ++row;
    const auto before = m.methods.size();
    index_of(m.methods, mi, r.fields[c_method]);
    if (m.methods.size() == before) throw ParseError("duplicate method '" + r.fields[c_method] + "'", row);
    std::vector<double> vals;
    for (std::size_t c = 0; c < r.fields.size(); ++c)
      if (c != c_method) vals.push_back(parse_number(r.fields[c], row));
    rows.push_back(std::move(vals));
  }
  m.values = Tensor(m.methods.size(), m.datasets.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t d = 0; d < rows[i].size(); ++d) m.values(i, d) = rows[i][d];
  return m;
}

ResultsMatrix read_results(const std::filesystem::path& path, Orientation orientation, const std::string& metric) {
  return parse_results(csv::read_file(path), orientation, metric);
}

void write_long_results(std::ostream& out, const ResultsMatrix& m, const std::string& metric) {
  m.check();
  csv::write_row(out, {"method", "dataset", "metric", "value"});
  for (std::size_t i = 0; i < m.method_count(); ++i)
    for (std::size_t d = 0; d < m.dataset_count(); ++d)
      csv::write_row(out, {m.methods[i], m.datasets[d], metric, fmt(m.values(i, d))});
}

void write_wide_results(std::ostream& out, const ResultsMatrix& m) {
  m.check();
  std::vector<std::string> header{"method"};
  header.insert(header.end(), m.datasets.begin(), m.datasets.end());
  csv::write_row(out, header);
  for (std::size_t i = 0; i < m.method_count(); ++i) {
    std::vector<std::string> row{m.methods[i]};
    for (std::size_t d = 0; d < m.dataset_count(); ++d) row.push_back(fmt(m.values(i, d)));
    csv::write_row(out, row);
  }
}

void write_rank_report(std::ostream& out, const CDResult& r) {
  csv::write_row(out, {"method", "mean_rank", "groups"});
  for (std::size_t i = 0; i < r.methods.size(); ++i) {
    std::string ids;
    for (std::size_t g = 0; g < r.groups.size(); ++g) {
      if (std::find(r.groups[g].begin(), r.groups[g].end(), i) == r.groups[g].end()) continue;
      if (!ids.empty()) ids += ';';
      ids += std::to_string(g + 1);
    }
    csv::write_row(out, {r.methods[i], fmt(r.mean_ranks[i]), ids});
  }
}

void write_cd_summary(std::ostream& out, const CDResult& r, std::size_t datasets) {
  csv::write_row(out, {"statistic", "value"});
  csv::write_row(out, {"methods", std::to_string(r.methods.size())});
  csv::write_row(out, {"datasets", std::to_string(datasets)});
  csv::write_row(out, {"friedman_chi2", fmt(r.friedman.statistic)});
  csv::write_row(out, {"friedman_df", std::to_string(r.friedman.degrees_of_freedom)});
  csv::write_row(out, {"friedman_p", fmt(r.friedman.p_value)});
  csv::write_row(out, {"alpha", fmt(r.alpha)});
  csv::write_row(out, {"critical_difference", fmt(r.critical_difference)});
}

void write_groups(std::ostream& out, const CDResult& r) {
  csv::write_row(out, {"group", "members"});
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    std::string members;
    for (auto i : r.groups[g]) {
      if (!members.empty()) members += ';';
      members += r.methods[i];
    }
    csv::write_row(out, {std::to_string(g + 1), members});
  }
}

std::vector<ParetoPoint> read_points(const std::filesystem::path& path, const std::string& name_column,
                                     const std::string& cost_column, const std::string& quality_column) {
  const auto table = csv::read_file(path);
  const auto cn = table.column(name_column);
  const auto cc = table.column(cost_column);
  const auto cq = table.column(quality_column);
  if (cn == csv::Table::npos || cc == csv::Table::npos || cq == csv::Table::npos)
    throw ParseError("points file needs columns '" + name_column + "', '" + cost_column + "' and '" +
                     quality_column + "'");
  std::vector<ParetoPoint> out;
  std::size_t row = 0;
  for (const auto& r : table.rows) {
    ++row;
    out.push_back({r.fields[cn], parse_number(r.fields[cc], row), parse_number(r.fields[cq], row)});
  }
  return out;
}

void write_pareto_report(std::ostream& out, const std::vector<ParetoPoint>& points, const std::vector<bool>& frontier) {
  if (points.size() != frontier.size()) throw ContractError("one frontier flag per point required");
  csv::write_row(out, {"method", "cost", "quality", "on_frontier"});
  for (std::size_t i = 0; i < points.size(); ++i)
    csv::write_row(out, {points[i].name, fmt(points[i].cost), fmt(points[i].quality), frontier[i] ? "1" : "0"});
}

void write_box_stats(std::ostream& out, const std::vector<std::string>& names, const std::vector<BoxStats>& boxes) {
  if (names.size() != boxes.size()) throw ContractError("one name per box required");
  csv::write_row(out, {"method", "min", "lower_whisker", "q1", "median", "q3", "upper_whisker", "max"});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    csv::write_row(out, {names[i], fmt(b.min), fmt(b.lower_whisker), fmt(b.q1), fmt(b.median), fmt(b.q3),
                         fmt(b.upper_whisker), fmt(b.max)});
  }
}

}  // namespace mug::stats
