#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mug::csv {

/// One parsed record plus the 1-based physical line it started on.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Record> rows;

  /// Index of `name` in the header, or npos.
  std::size_t column(std::string_view name) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Reads comma-delimited UTF-8 with double-quote escaping ("" inside quotes);
/// quoted fields may span lines. A leading UTF-8 BOM is skipped. Rows whose
/// field count differs from the header raise ParseError with the data row
/// number.
Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote, or line break.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace mug::csv
