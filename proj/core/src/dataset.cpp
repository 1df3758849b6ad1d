#include "mug/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_set>

#include "mug/csv.hpp"
#include "mug/error.hpp"
#include "mug/keyvalue.hpp"
#include "mug/rng.hpp"

namespace mug::data {

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::numerical: return "numerical";
    case FieldKind::categorical: return "categorical";
    case FieldKind::text: return "text";
    case FieldKind::image_path: return "image_path";
    case FieldKind::label: return "label";
  }
  return "?";
}

FieldKind parse_field_kind(std::string_view name) {
  if (name == "numerical") return FieldKind::numerical;
  if (name == "categorical") return FieldKind::categorical;
  if (name == "text") return FieldKind::text;
  if (name == "image_path" || name == "image") return FieldKind::image_path;
  if (name == "label") return FieldKind::label;
  throw SchemaError("unknown field kind '" + std::string(name) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val" || name == "valid" || name == "validation" || name == "dev") return Split::val;
  if (name == "test") return Split::test;
  throw ParseError("unknown split tag '" + std::string(name) + "'");
}

void validate_schema(const FieldSchema& schema) {
  std::unordered_set<std::string> seen;
  std::size_t labels = 0, images = 0;
  for (const auto& f : schema) {
    if (!seen.insert(f.column_name).second) {
      throw SchemaError("duplicate column '" + f.column_name + "' in schema");
    }
    labels += f.kind == FieldKind::label;
    images += f.kind == FieldKind::image_path;
  }
  if (labels != 1) {
    throw SchemaError("schema must declare exactly one label column (found " +
                      std::to_string(labels) + ")");
  }
  if (images > 1) throw SchemaError("at most one image column is supported");
}

std::vector<const FieldSpec*> Dataset::tabular_fields() const {
  std::vector<const FieldSpec*> out;
  for (const auto& f : schema)
    if (f.is_tabular()) out.push_back(&f);
  return out;
}

std::vector<const FieldSpec*> Dataset::text_fields() const {
  std::vector<const FieldSpec*> out;
  for (const auto& f : schema)
    if (f.kind == FieldKind::text) out.push_back(&f);
  return out;
}

const FieldSpec* Dataset::image_field() const {
  for (const auto& f : schema)
    if (f.kind == FieldKind::image_path) return &f;
  return nullptr;
}

const FieldSpec& Dataset::label_field() const {
  for (const auto& f : schema)
    if (f.kind == FieldKind::label) return f;
  throw SchemaError("dataset has no label column");
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.schema = schema;
  out.label_vocab = label_vocab;
  out.samples.reserve(rows.size());
  out.split.reserve(rows.size());
  for (auto r : rows) {
    if (r >= samples.size()) throw ContractError("Dataset::subset: row out of range");
    out.samples.push_back(samples[r]);
    out.split.push_back(split[r]);
  }
  return out;
}

void Dataset::check_invariants() const {
  if (split.size() != samples.size()) throw ContractError("split tags do not cover every sample");
  const std::size_t ntab = tabular_fields().size();
  const std::size_t ntxt = text_fields().size();
  for (const auto& s : samples) {
    if (s.tabular.size() != ntab || s.texts.size() != ntxt) {
      throw ContractError("sample '" + s.id + "' does not match the schema");
    }
    if (s.label && *s.label >= label_vocab.size()) {
      throw ContractError("sample '" + s.id + "' has an out-of-range label");
    }
  }
}

namespace {

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& table_file,
                     const std::filesystem::path& image_dir, const FieldSchema& schema,
                     const LoadOptions& options) {
  validate_schema(schema);
  const csv::Table table = csv::read_file(table_file);

  // Schema order follows the file header so tabular/text positions are stable.
  std::vector<std::pair<std::size_t, FieldSpec>> located;
  std::optional<FieldSpec> absent_label;
  for (const auto& f : schema) {
    const auto col = table.column(f.column_name);
    if (col == csv::Table::npos) {
      if (f.kind == FieldKind::label && options.label_optional) {
        absent_label = f;
        continue;
      }
      throw SchemaError("column '" + f.column_name + "' not found in " + table_file.string());
    }
    located.emplace_back(col, f);
  }
  std::sort(located.begin(), located.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::size_t id_col = csv::Table::npos, split_col = csv::Table::npos;
  if (!options.id_column.empty()) {
    id_col = table.column(options.id_column);
    if (id_col == csv::Table::npos) throw SchemaError("id column '" + options.id_column + "' not found");
  }
  if (!options.split_column.empty()) {
    split_col = table.column(options.split_column);
    if (split_col == csv::Table::npos) {
      throw SchemaError("split column '" + options.split_column + "' not found");
    }
  }

  Dataset ds;
  for (const auto& [col, f] : located) ds.schema.push_back(f);
  if (absent_label) ds.schema.push_back(*absent_label);

  // Label vocabulary in lexicographic order, independent of row order.
  std::set<std::string> label_names;
  std::size_t label_col = csv::Table::npos;
  for (const auto& [col, f] : located)
    if (f.kind == FieldKind::label) label_col = col;
  if (label_col != csv::Table::npos)
    for (const auto& rec : table.rows)
      if (!is_blank(rec.fields[label_col])) label_names.insert(rec.fields[label_col]);
  ds.label_vocab.assign(label_names.begin(), label_names.end());
  std::map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < ds.label_vocab.size(); ++i) label_index[ds.label_vocab[i]] = i;

  std::unordered_set<std::string> ids;
  ds.samples.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& fields = table.rows[r].fields;
    const std::size_t data_row = r + 1;
    Sample s;
    s.id = id_col == csv::Table::npos ? std::to_string(r) : fields[id_col];
    if (!ids.insert(s.id).second) {
      throw IngestionError("duplicate sample id '" + s.id + "' at row " + std::to_string(data_row));
    }
    for (const auto& [col, f] : located) {
      const std::string& cell = fields[col];
      const bool blank = is_blank(cell);
      if (blank && !f.nullable && f.kind != FieldKind::label) {
        throw ParseError("blank value in non-nullable column '" + f.column_name + "'", data_row);
      }
      switch (f.kind) {
        case FieldKind::numerical:
          if (blank) {
            s.tabular.emplace_back(std::nullopt);
          } else if (auto v = parse_number(cell)) {
            s.tabular.emplace_back(Cell{*v});
          } else {
            throw ParseError("non-numeric value '" + cell + "' in numerical column '" +
                                 f.column_name + "'",
                             data_row);
          }
          break;
        case FieldKind::categorical:
          s.tabular.emplace_back(blank ? OptionalCell{} : OptionalCell{Cell{cell}});
          break;
        case FieldKind::text:
          s.texts.push_back(blank ? std::string{} : cell);
          break;
        case FieldKind::image_path:
          if (!blank) s.image_ref = image_dir / cell;
          break;
        case FieldKind::label:
          if (!blank) s.label = label_index.at(cell);
          break;
      }
    }
    ds.split.push_back(split_col == csv::Table::npos ? Split::train
                                                     : parse_split(fields[split_col]));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

SchemaConfig schema_from_config(const KeyValueConfig& cfg) {
  SchemaConfig sc;
  sc.options.id_column = cfg.get_or("id_column", "");
  sc.options.split_column = cfg.get_or("split_column", "");
  for (const auto& [name, kind] : cfg.with_prefix("column.")) {
    FieldSpec f;
    f.column_name = name;
    f.kind = parse_field_kind(kind);
    f.nullable = cfg.get_bool("nullable." + name).value_or(true);
    sc.schema.push_back(std::move(f));
  }
  validate_schema(sc.schema);
  return sc;
}

void write_schema_config(const SchemaConfig& sc, std::ostream& out) {
  if (!sc.options.id_column.empty()) out << "id_column = " << sc.options.id_column << '\n';
  if (!sc.options.split_column.empty()) out << "split_column = " << sc.options.split_column << '\n';
  for (const auto& f : sc.schema) {
    out << "column." << f.column_name << " = " << to_string(f.kind) << '\n';
    if (!f.nullable) out << "nullable." << f.column_name << " = false\n";
  }
}

FieldSchema infer_schema(const std::filesystem::path& table_file, const InferenceHints& hints) {
  const csv::Table table = csv::read_file(table_file);
  auto listed = [](const std::vector<std::string>& v, const std::string& name) {
    return std::find(v.begin(), v.end(), name) != v.end();
  };
  FieldSchema schema;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (listed(hints.ignore_columns, name)) continue;
    FieldSpec f;
    f.column_name = name;
    if (name == hints.label_column) {
      f.kind = FieldKind::label;
    } else if (listed(hints.text_columns, name)) {
      f.kind = FieldKind::text;
    } else if (listed(hints.image_columns, name)) {
      f.kind = FieldKind::image_path;
    } else {
      const bool numeric = std::all_of(table.rows.begin(), table.rows.end(), [&](const auto& rec) {
        return is_blank(rec.fields[c]) || parse_number(rec.fields[c]).has_value();
      });
      f.kind = numeric ? FieldKind::numerical : FieldKind::categorical;
    }
    schema.push_back(std::move(f));
  }
  validate_schema(schema);
  return schema;
}

Dataset split_dataset(Dataset dataset, const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw DomainError("split ratios must be nonnegative and sum to 1");
  }
  const std::size_t n = dataset.size();
  if (n < 3 && ratios.train > 0 && ratios.val > 0 && ratios.test > 0) {
    throw DomainError("cannot split " + std::to_string(n) + " samples three ways");
  }
  auto share = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = share(ratios.val);
  const std::size_t n_test = share(ratios.test);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  dataset.split.assign(n, Split::train);
  for (std::size_t k = 0; k < n_test; ++k) dataset.split[order[k]] = Split::test;
  for (std::size_t k = n_test; k < n_test + n_val; ++k) dataset.split[order[k]] = Split::val;
  return dataset;
}

Dataset regroup_sparse_labels(Dataset dataset, std::size_t min_count) {
  std::vector<std::size_t> counts(dataset.label_vocab.size(), 0);
  bool any_missing = false;
  for (const auto& s : dataset.samples) {
    if (s.label) ++counts[*s.label];
    else any_missing = true;
  }

  const bool merging = std::any_of(counts.begin(), counts.end(),
                                   [&](std::size_t c) { return c > 0 && c < min_count; });
  std::vector<std::string> vocab;
  std::vector<std::size_t> remap(counts.size(), 0);
  std::vector<std::size_t> sparse;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    // A pre-existing "Other" category absorbs the merged ones.
    const bool into_other = merging && (counts[i] < min_count || dataset.label_vocab[i] == kOtherLabel);
    if (!into_other) {
      remap[i] = vocab.size();
      vocab.push_back(dataset.label_vocab[i]);
    } else if (counts[i] > 0 || dataset.label_vocab[i] == kOtherLabel) {
      sparse.push_back(i);
    }
  }
  if (!sparse.empty()) {
    const std::size_t other = vocab.size();
    vocab.emplace_back(kOtherLabel);
    for (auto i : sparse) remap[i] = other;
  }
  std::optional<std::size_t> none_type;
  if (any_missing) {
    none_type = vocab.size();
    vocab.emplace_back(kNoneTypeLabel);
  }
  for (auto& s : dataset.samples) s.label = s.label ? remap[*s.label] : *none_type;
  dataset.label_vocab = std::move(vocab);
  return dataset;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(c));
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace mug::data
