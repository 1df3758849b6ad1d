#include "mug/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

#include <spdlog/spdlog.h>

#include <json.hpp>

#include "mug/error.hpp"
#include "mug/image_io.hpp"

namespace mug::profile {

double shannon_equitability(std::span<const std::size_t> class_counts) {
  double n = 0.0;
  std::size_t k = 0;
  for (auto c : class_counts) {
    if (c == 0) continue;
    n += static_cast<double>(c);
    ++k;
  }
  if (k == 0) throw DomainError("shannon_equitability needs at least one positive count");
  if (k == 1) {
    spdlog::warn("equitability of a single class is undefined; reporting 1.0");
    return 1.0;
  }
  double h = 0.0;
  for (auto c : class_counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(k)), 0.0, 1.0);
}

std::size_t rgb_bin(double mean_value) {
  const double width = 256.0 / kRgbBins;
  const auto bin = static_cast<std::size_t>(std::max(0.0, mean_value) / width);
  return std::min(bin, kRgbBins - 1);
}

DatasetProfile profile_dataset(const data::Dataset& ds, const ProfileOptions& options) {
  if (ds.empty()) throw DomainError("empty dataset");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (!options.train_only || ds.split[i] == data::Split::train) rows.push_back(i);
  if (rows.empty()) throw DomainError("empty dataset (no rows selected)");

  DatasetProfile p;

  p.class_counts.assign(ds.label_vocab.size(), 0);
  for (auto r : rows)
    if (ds.samples[r].label) ++p.class_counts[*ds.samples[r].label];
  const bool any_label = std::any_of(p.class_counts.begin(), p.class_counts.end(),
                                     [](std::size_t c) { return c > 0; });
  p.equitability = any_label ? shannon_equitability(p.class_counts) : 1.0;

  const auto tab_fields = ds.tabular_fields();
  std::size_t total_cells = 0, missing_cells = 0;
  for (std::size_t c = 0; c < tab_fields.size(); ++c) {
    const auto& f = *tab_fields[c];
    std::size_t missing = 0;
    std::vector<double> values;
    std::set<std::string> categories;
    for (auto r : rows) {
      const auto& cell = ds.samples[r].tabular[c];
      if (!cell) {
        ++missing;
        continue;
      }
      if (f.kind == data::FieldKind::numerical) values.push_back(std::get<double>(*cell));
      else categories.insert(std::get<std::string>(*cell));
    }
    const double miss_pct = 100.0 * static_cast<double>(missing) / static_cast<double>(rows.size());
    p.missing_by_column.push_back({f.column_name, 100.0 - miss_pct, miss_pct});
    total_cells += rows.size();
    missing_cells += missing;

    if (f.kind == data::FieldKind::numerical) {
      NumericStats st{f.column_name, std::nullopt, std::nullopt};
      if (!values.empty()) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());
        st.mean = mean;
        st.sd = std::sqrt(var);
      }
      p.numeric_stats.push_back(std::move(st));
    } else {
      p.categorical_cardinalities.push_back({f.column_name, categories.size()});
    }
  }
  if (total_cells > 0) {
    p.overall_missing_pct = 100.0 * static_cast<double>(missing_cells) / static_cast<double>(total_cells);
    p.overall_valid_pct = 100.0 - p.overall_missing_pct;
  }

  if (!ds.text_fields().empty()) {
    std::map<std::size_t, std::size_t> counts;
    for (auto r : rows) {
      std::size_t words = 0;
      for (const auto& t : ds.samples[r].texts) words += data::tokenize(t).size();
      ++counts[words];
    }
    for (const auto& [w, c] : counts)
      p.word_count_hist[w] = 100.0 * static_cast<double>(c) / static_cast<double>(rows.size());
  }

  p.rgb_mean_hist.assign(kRgbBins, 0.0);
  if (ds.image_field()) {
    std::vector<std::size_t> bins(kRgbBins, 0);
    for (auto r : rows) {
      const auto& ref = ds.samples[r].image_ref;
      if (!ref) continue;
      try {
        ++bins[rgb_bin(image::mean_intensity(image::load(*ref)))];
        ++p.images_profiled;
      } catch (const Error& e) {
        spdlog::warn("profile: skipping image of '{}': {}", ds.samples[r].id, e.what());
      }
    }
    if (p.images_profiled > 0)
      for (std::size_t b = 0; b < kRgbBins; ++b)
        p.rgb_mean_hist[b] = 100.0 * static_cast<double>(bins[b]) / static_cast<double>(p.images_profiled);
  }
  return p;
}

void write_report(const DatasetProfile& p, const std::filesystem::path& path) {
  using nlohmann::json;
  json j;
  j["equitability"] = p.equitability;
  j["class_counts"] = p.class_counts;
  j["missing"] = {{"overall_valid_pct", p.overall_valid_pct}, {"overall_missing_pct", p.overall_missing_pct}};
  json cols = json::array();
  for (const auto& m : p.missing_by_column)
    cols.push_back({{"column", m.column}, {"valid_pct", m.valid_pct}, {"missing_pct", m.missing_pct}});
  j["missing"]["columns"] = cols;
  json num = json::array();
  for (const auto& s : p.numeric_stats) {
    num.push_back({{"column", s.column},
                   {"mean", s.mean ? json(*s.mean) : json(nullptr)},
                   {"sd", s.sd ? json(*s.sd) : json(nullptr)}});
  }
  j["numeric_stats"] = num;
  json cat = json::array();
  for (const auto& c : p.categorical_cardinalities) cat.push_back({{"column", c.column}, {"categories", c.categories}});
  j["categorical_cardinalities"] = cat;
  json words = json::array();
  for (const auto& [w, pct] : p.word_count_hist) words.push_back({{"words", w}, {"pct", pct}});
  j["word_count_hist"] = words;
  j["rgb_mean_hist"] = {{"bins", kRgbBins}, {"range", {0, 255}}, {"pct", p.rgb_mean_hist},
                        {"images", p.images_profiled}};

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void print_summary(const DatasetProfile& p, const data::Dataset& ds, std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << "samples              " << ds.size() << '\n';
  out << "classes              " << ds.label_vocab.size() << '\n';
  out << "shannon equitability " << p.equitability << '\n';
  out << std::setprecision(2);
  out << "tabular valid/missing " << p.overall_valid_pct << "% / " << p.overall_missing_pct << "%\n";
  for (const auto& s : p.numeric_stats) {
    out << "  numeric  " << std::left << std::setw(24) << s.column << std::right;
    if (s.mean) out << " mean " << *s.mean << "  sd " << *s.sd << '\n';
    else out << " (all missing)\n";
  }
  for (const auto& c : p.categorical_cardinalities)
    out << "  category " << std::left << std::setw(24) << c.column << std::right << ' ' << c.categories << '\n';
  if (!p.word_count_hist.empty()) {
    out << "word counts:";
    for (const auto& [w, pct] : p.word_count_hist) out << ' ' << w << ':' << pct << '%';
    out << '\n';
  }
  if (p.images_profiled) out << "images profiled      " << p.images_profiled << '\n';
}

}  // namespace mug::profile
