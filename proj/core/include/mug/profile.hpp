#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mug/dataset.hpp"

namespace mug::profile {

/// Shannon equitability H / ln(k) of a class-count histogram. Zero counts are
/// skipped and do not contribute to k. A single populated class returns 1.0
/// (with a logged warning) since the ratio is 0/0 there. Throws DomainError
/// when no count is positive.
double shannon_equitability(std::span<const std::size_t> class_counts);

struct ColumnMissing {
  std::string column;
  double valid_pct = 100.0;
  double missing_pct = 0.0;
};

struct NumericStats {
  std::string column;
  std::optional<double> mean;  ///< absent when every cell is missing
  std::optional<double> sd;    ///< population standard deviation
};

struct CategoryCount {
  std::string column;
  std::size_t categories = 0;
};

struct DatasetProfile {
  double equitability = 1.0;
  std::vector<std::size_t> class_counts;  ///< parallel to the label vocabulary
  std::vector<ColumnMissing> missing_by_column;
  double overall_valid_pct = 100.0;
  double overall_missing_pct = 0.0;
  std::vector<NumericStats> numeric_stats;
  std::vector<CategoryCount> categorical_cardinalities;
  std::map<std::size_t, double> word_count_hist;  ///< words per sample → % of samples
  std::vector<double> rgb_mean_hist;              ///< 32 bins over [0,255], % of images
  std::size_t images_profiled = 0;
};

inline constexpr std::size_t kRgbBins = 32;

struct ProfileOptions {
  bool train_only = false;
};

/// Diversity statistics of a non-empty dataset. Missing percentages count
/// tabular cells only. Images that cannot be decoded are skipped.
DatasetProfile profile_dataset(const data::Dataset& ds, const ProfileOptions& options = {});

/// Bin index in [0, kRgbBins) for a mean pixel value in [0,255].
std::size_t rgb_bin(double mean_value);

/// JSON report (documented in the README).
void write_report(const DatasetProfile& p, const std::filesystem::path& path);
/// Human-readable summary table.
void print_summary(const DatasetProfile& p, const data::Dataset& ds, std::ostream& out);

}  // namespace mug::profile
