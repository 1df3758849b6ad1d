#include "mug/csv.hpp"

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "mug/error.hpp"

namespace mug::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return npos;
}

namespace {

// Splits the whole buffer into records. Returns false for an unterminated
// quote.
bool split_records(std::string_view text, std::vector<Record>& out, std::size_t& bad_line) {
  std::size_t line = 1;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    Record rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool done = false;
    while (!done) {
      if (pos >= n) {
        if (in_quotes) {
          bad_line = rec.line;
          return false;
        }
        rec.fields.push_back(std::move(field));
        done = true;
        break;
      }
      const char c = text[pos];
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < n && text[pos + 1] == '"') {
            field.push_back('"');
            pos += 2;
          } else {
            in_quotes = false;
            ++pos;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++pos;
        }
        continue;
      }
      switch (c) {
        case '"':
          if (field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
          } else {
            field.push_back(c);
          }
          ++pos;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          field_was_quoted = false;
          ++pos;
          break;
        case '\r':
          ++pos;
          break;
        case '\n':
          rec.fields.push_back(std::move(field));
          ++pos;
          ++line;
          done = true;
          break;
        default:
          field.push_back(c);
          ++pos;
      }
    }
    // Blank physical lines carry no record.
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    out.push_back(std::move(rec));
  }
  return true;
}

}  // namespace

Table read(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::string_view view = text;
  if (view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);

  std::vector<Record> records;
  std::size_t bad_line = 0;
  if (!split_records(view, records, bad_line)) {
    throw ParseError("unterminated quoted field starting at line " + std::to_string(bad_line));
  }
  if (records.empty()) throw ParseError("missing CSV header");

  Table table;
  table.header = std::move(records.front().fields);
  table.rows.reserve(records.size() - 1);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].fields.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(records[i].fields.size()),
                       i);
    }
    table.rows.push_back(std::move(records[i]));
  }
  return table;
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return read(in);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace mug::csv
