#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mug/dataset.hpp"
#include "mug/features.hpp"
#include "mug/graph.hpp"
#include "mug/hpo.hpp"
#include "mug/keyvalue.hpp"
#include "mug/model.hpp"
#include "mug/tensor.hpp"

namespace mugcli {

namespace fs = std::filesystem;

/// Where the samples come from and how their columns are typed.
struct DataOptions {
  std::string data;
  std::string image_dir;  ///< defaults to the data file's directory
  std::string schema;     ///< key/value schema file
  std::string label;      ///< label column when the schema is inferred
  std::vector<std::string> text_columns;
  std::vector<std::string> image_columns;
  std::string id_column;
  std::string split_column;
};

/// Empty config when `path` is empty.
mug::KeyValueConfig load_config(const std::string& path);

/// The run seed: the flag when given, else the config's `seed`, else 0. The
/// result is written back so every consumer reads one value.
std::uint64_t resolve_seed(mug::KeyValueConfig& cfg, std::optional<std::uint64_t> flag);

/// Schema file, else `column.*` keys in the config, else inference around
/// the label column. Id and split column flags override whichever source.
mug::data::SchemaConfig resolve_schema(const mug::KeyValueConfig& cfg, const DataOptions& d);

fs::path image_dir_for(const DataOptions& d);

/// Throws DomainError("empty dataset") when the table has no data rows.
void require_rows(const fs::path& table);

/// Loaded, sparse labels regrouped (`data.min_label_count`), and split by the
/// split column or by `split.train/val/test` ratios with the run seed.
mug::data::Dataset load_labelled(const mug::KeyValueConfig& cfg, const DataOptions& d,
                                 const mug::data::SchemaConfig& sc, std::uint64_t seed);

mug::data::ExtractorSpec extractor_spec(const mug::KeyValueConfig& cfg, std::uint64_t seed);

/// `graph.sim|spy|k|gamma|gamma_rule` shared by every modality, with
/// `graph.<tab|txt|img>.*` overriding per modality.
mug::graph::GraphConfig graph_config(const mug::KeyValueConfig& cfg);
/// Fully expanded per-modality keys.
void graph_config_to(mug::KeyValueConfig& kv, const mug::graph::GraphConfig& g);

/// `hpo.families`, `hpo.spy_grid`, `hpo.k_grid` (comma lists),
/// `hpo.per_modality`, `hpo.budget`.
mug::hpo::HPOSpace hpo_space(const mug::KeyValueConfig& cfg, std::uint64_t seed);

/// Everything `predict` needs to score unseen rows.
struct ModelBundle {
  mug::data::SchemaConfig schema;
  mug::data::FeatureExtractor extractor;
  mug::data::ModalityFeatures train_features;
  mug::graph::GraphConfig graph;
  mug::model::MuGNetParams params;
  std::vector<std::string> labels;
};
void write_bundle(const fs::path& dir, const ModelBundle& b);
ModelBundle read_bundle(const fs::path& dir);

/// `sample_id,predicted_label,p_<label>...,alpha_tab,alpha_txt,alpha_img`.
void write_predictions(const fs::path& path, const std::vector<std::string>& ids,
                       const std::vector<std::string>& labels, const mug::Tensor& probs,
                       const mug::Tensor& alpha);

struct PredictionTable {
  std::vector<std::string> ids;
  std::vector<std::string> labels;  ///< from the p_<label> columns
  mug::Tensor probs;
};
PredictionTable read_predictions(const fs::path& path);

/// Parent directories created; throws IngestionError when not writable.
std::ofstream open_output(const fs::path& path);

}  // namespace mugcli
