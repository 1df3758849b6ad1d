#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mug {
class KeyValueConfig;
}

namespace mug::data {

enum class FieldKind { numerical, categorical, text, image_path, label };

std::string_view to_string(FieldKind kind);
FieldKind parse_field_kind(std::string_view name);

struct FieldSpec {
  std::string column_name;
  FieldKind kind = FieldKind::numerical;
  bool nullable = true;

  bool is_tabular() const noexcept {
    return kind == FieldKind::numerical || kind == FieldKind::categorical;
  }
};

using FieldSchema = std::vector<FieldSpec>;

/// Throws SchemaError unless there is exactly one label column, names are
/// unique, and at most one image column is declared.
void validate_schema(const FieldSchema& schema);

/// A tabular cell: a number for numerical columns, the raw token for
/// categorical ones. Absent values are std::nullopt, never a sentinel.
using Cell = std::variant<double, std::string>;
using OptionalCell = std::optional<Cell>;

struct Sample {
  std::string id;
  std::vector<OptionalCell> tabular;   ///< one per tabular column, schema order
  std::vector<std::string> texts;      ///< one per text column; "" when blank
  std::optional<std::filesystem::path> image_ref;
  std::optional<std::size_t> label;    ///< index into Dataset::label_vocab
};

enum class Split : std::uint8_t { train, val, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Dataset {
  FieldSchema schema;
  std::vector<Sample> samples;
  std::vector<std::string> label_vocab;
  std::vector<Split> split;  ///< parallel to samples

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  /// Schema entries in the order Sample::tabular / Sample::texts use.
  std::vector<const FieldSpec*> tabular_fields() const;
  std::vector<const FieldSpec*> text_fields() const;
  const FieldSpec* image_field() const;
  const FieldSpec& label_field() const;

  std::vector<std::size_t> indices_of(Split s) const;
  /// Copy restricted to `rows` (in the given order); vocab and schema kept.
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Throws ContractError when an invariant is broken (lengths vs schema,
  /// label range, split length).
  void check_invariants() const;
};

struct LoadOptions {
  /// Column holding sample ids; when empty the 0-based row number is used.
  std::string id_column;
  /// Optional column with train/val/test tags; otherwise every sample is train.
  std::string split_column;
  /// Accept a table without the label column; every sample is unlabelled.
  bool label_optional = false;
};

/// Parses a CSV table against `schema`. Blank cells become missing markers;
/// image paths are resolved relative to `image_dir` but not opened.
Dataset load_dataset(const std::filesystem::path& table_file,
                     const std::filesystem::path& image_dir, const FieldSchema& schema,
                     const LoadOptions& options = {});

/// Schema plus load options read from a key/value config:
///
///     id_column = id
///     split_column = split
///     column.<name> = numerical | categorical | text | image_path | label
///     nullable.<name> = false
struct SchemaConfig {
  FieldSchema schema;
  LoadOptions options;
};
SchemaConfig schema_from_config(const KeyValueConfig& cfg);
void write_schema_config(const SchemaConfig& sc, std::ostream& out);

/// Column roles for inference; unlisted columns are numerical when every
/// non-blank cell parses as a number, categorical otherwise.
struct InferenceHints {
  std::string label_column;
  std::vector<std::string> text_columns;
  std::vector<std::string> image_columns;
  std::vector<std::string> ignore_columns;  ///< e.g. id and split columns
};
FieldSchema infer_schema(const std::filesystem::path& table_file, const InferenceHints& hints);

struct SplitRatios {
  double train = 0.80;
  double val = 0.05;
  double test = 0.15;
};

/// Seeded shuffle partition. Val and test get floor(r·N) rows each; the
/// remainder goes to train. Existing tags are overwritten.
Dataset split_dataset(Dataset dataset, const SplitRatios& ratios, std::uint64_t seed);

inline constexpr std::string_view kOtherLabel = "Other";
inline constexpr std::string_view kNoneTypeLabel = "None_Type";

/// Labels seen fewer than `min_count` times merge into "Other"; samples
/// without a label get "None_Type". Surviving labels keep their vocab order,
/// followed by "Other" and "None_Type" when used.
Dataset regroup_sparse_labels(Dataset dataset, std::size_t min_count);

/// Lowercased word tokens; anything that is not an ASCII letter or digit
/// separates tokens, and bytes >= 0x80 are kept as word characters.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace mug::data
