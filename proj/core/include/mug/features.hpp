#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mug/dataset.hpp"
#include "mug/linalg.hpp"
#include "mug/tensor.hpp"

namespace mug::data {

/// Row-aligned per-modality feature blocks for the same N samples.
struct ModalityFeatures {
  Tensor tab;
  Tensor txt;
  Tensor img;
  std::vector<std::string> row_ids;

  std::size_t rows() const noexcept { return row_ids.size(); }
  /// Throws ContractError unless all blocks have rows() rows and are finite.
  void check() const;
  ModalityFeatures subset(std::span<const std::size_t> rows) const;
  /// Rows of `a` followed by rows of `b`; widths must agree.
  static ModalityFeatures concat(const ModalityFeatures& a, const ModalityFeatures& b);
};

struct ExtractorSpec {
  std::size_t text_dims = 50;
  std::size_t image_dims_per_channel = 30;
  int image_side = 64;
  std::uint64_t seed = 0;
};

/// Numerical columns pass through unchanged (missing → training median);
/// categorical values map to integers in order of first appearance over the
/// training rows, with the training cardinality reserved for missing and
/// unseen values.
class TabularEncoder {
 public:
  void fit(const Dataset& ds);
  Tensor transform(const Dataset& ds) const;
  /// One column by name. Throws SchemaError for non-tabular columns.
  std::vector<double> transform_column(const Dataset& ds, const std::string& column) const;

  std::size_t width() const noexcept { return columns_.size(); }
  bool fitted() const noexcept { return fitted_; }

  struct Column {
    std::string name;
    FieldKind kind = FieldKind::numerical;
    double median = 0.0;                       ///< numerical imputation value
    std::map<std::string, std::size_t> codes;  ///< categorical mapping
  };
  const std::vector<Column>& columns() const noexcept { return columns_; }

 private:
  friend class FeatureExtractor;
  double encode(const Column& col, const OptionalCell& cell) const;

  std::vector<Column> columns_;
  bool fitted_ = false;
};

/// Token counts over the concatenated text fields, projected onto a
/// truncated-SVD basis fitted on training rows.
class TextExtractor {
 public:
  void fit(const Dataset& ds, const ExtractorSpec& spec);
  Tensor transform(const Dataset& ds) const;

  std::size_t width() const noexcept { return basis_.output_dim(); }
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  const linalg::LinearProjection& basis() const noexcept { return basis_; }

 private:
  friend class FeatureExtractor;
  linalg::SparseRow counts(const Sample& s) const;

  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t> index_;
  linalg::LinearProjection basis_;
};

/// Images resized to side×side, channel values in [0,1], one PCA basis per
/// colour channel fitted on training rows. Output width is always
/// 3 × image_dims_per_channel; components the training data cannot support
/// are zero columns. Missing or undecodable images yield zero rows.
class ImageExtractor {
 public:
  void fit(const Dataset& ds, const ExtractorSpec& spec);
  Tensor transform(const Dataset& ds) const;

  std::size_t width() const noexcept { return 3 * dims_per_channel_; }
  const std::array<linalg::LinearProjection, 3>& bases() const noexcept { return channel_; }

 private:
  friend class FeatureExtractor;
  /// Planar pixels, or nullopt (with a logged warning) when unavailable.
  std::optional<std::vector<double>> pixels(const Sample& s) const;

  int side_ = 64;
  std::size_t dims_per_channel_ = 30;
  std::array<linalg::LinearProjection, 3> channel_;
};

/// Fit on split=train rows, transform any dataset sharing the schema.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(ExtractorSpec spec = {}) : spec_(spec) {}

  void fit(const Dataset& ds);
  ModalityFeatures transform(const Dataset& ds) const;

  const ExtractorSpec& spec() const noexcept { return spec_; }
  const TabularEncoder& tabular() const noexcept { return tab_; }
  const TextExtractor& text() const noexcept { return txt_; }
  const ImageExtractor& image() const noexcept { return img_; }

  /// Fitted state as JSON, enough to transform unseen rows later.
  void save(const std::filesystem::path& path) const;
  static FeatureExtractor load(const std::filesystem::path& path);

 private:
  ExtractorSpec spec_;
  TabularEncoder tab_;
  TextExtractor txt_;
  ImageExtractor img_;
};

/// Fit-and-transform shorthands over the training split.
Tensor encode_tabular(const Dataset& ds);
Tensor extract_text_features(const Dataset& ds, const ExtractorSpec& spec);
Tensor extract_image_features(const Dataset& ds, const ExtractorSpec& spec);

/// Binary block file: "MUGF", u32 version, u64 N, u64 d, then N·d
/// little-endian f64 row-major. Ids go to `<path>.ids`, one per line.
inline constexpr std::uint32_t kBlockVersion = 1;
void write_block(const std::filesystem::path& path, const Tensor& block,
                 const std::vector<std::string>& ids);
struct Block {
  Tensor values;
  std::vector<std::string> ids;
};
Block read_block(const std::filesystem::path& path);

/// `<dir>/tab.mugf`, `<dir>/txt.mugf`, `<dir>/img.mugf` plus sidecars.
void write_features(const std::filesystem::path& dir, const ModalityFeatures& f);
ModalityFeatures read_features(const std::filesystem::path& dir);

}  // namespace mug::data
