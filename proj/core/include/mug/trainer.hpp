#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mug/dataset.hpp"
#include "mug/features.hpp"
#include "mug/graph.hpp"
#include "mug/keyvalue.hpp"
#include "mug/model.hpp"
#include "mug/rng.hpp"

namespace mug::train {

struct TrainConfig {
  double lr_max = 0.001;
  double lr_min = 0.0;
  std::size_t epochs = 300;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double root_fraction = 0.8;
  std::size_t walk_length = 2;
  std::size_t patience = 30;
  std::uint64_t seed = 0;
  std::optional<double> time_budget_seconds;

  /// Throws ConfigError on root_fraction ∉ (0,1], lr_min > lr_max, zero
  /// epochs or zero patience.
  void validate() const;
  /// Keys under `prefix`: lr_max, lr_min, epochs, weight_decay, beta1, beta2,
  /// adam_eps, root_fraction, walk_length, patience, seed, time_budget_seconds.
  static TrainConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "train.");
  void to_config(KeyValueConfig& kv, const std::string& prefix = "train.") const;
};

/// Budget from the config, else from MUG_TIME_BUDGET_SECONDS, else none.
/// Throws ConfigError on a malformed or non-positive environment value.
std::optional<double> effective_time_budget(const TrainConfig& config);

/// lr_min + ½(lr_max − lr_min)(1 + cos(π t/T)), 0 ≤ t ≤ T, T ≥ 1.
double cosine_annealing_lr(std::size_t t, std::size_t total, double lr_max, double lr_min);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(std::span<const Tensor* const> params);
};

/// One decoupled-decay Adam update:
///   θ ← θ − lr·wd·θ − lr·m̂/(√v̂ + eps)
/// with bias-corrected moments. The decay uses θ before the update.
void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
                const AdamWHyper& hyper);

struct Subgraph {
  std::vector<std::size_t> nodes;  ///< sorted original node ids
  graph::ModalityGraph graph;      ///< induced on `nodes`, renumbered
};

/// Nodes visited by walks of `walk_length` steps from each root. A step moves
/// to a uniformly chosen neighbour other than the node itself; a node whose
/// only neighbour is itself stays put. Result sorted and unique.
std::vector<std::size_t> random_walk_nodes(const graph::ModalityGraph& g, std::span<const std::size_t> roots,
                                           std::size_t walk_length, Rng& rng);

/// ⌈root_fraction·N⌉ roots drawn uniformly without replacement, then walks.
Subgraph sample_random_walk_subgraph(const graph::ModalityGraph& g, double root_fraction, std::size_t walk_length,
                                     Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_logloss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  model::MuGNetParams best;
  std::vector<EpochRecord> history;
  std::size_t selected_epoch = 0;  ///< 1-based, argmin of val_logloss
  double train_seconds = 0.0;
  double inference_seconds = 0.0;
  std::string stop_reason;  ///< "epochs", "patience" or "time_budget"

  const EpochRecord& selected() const { return history.at(selected_epoch - 1); }
};

/// Labelled rows of one split with aligned feature blocks.
struct LabelledBlock {
  data::ModalityFeatures features;
  std::vector<std::size_t> labels;
};

/// Rows of `split` from a dataset whose samples align with `features` rows.
/// Throws ContractError when a selected sample has no label.
LabelledBlock select_split(const data::Dataset& ds, const data::ModalityFeatures& features, data::Split split);

/// Model input widths and class count filled in from the data.
model::ModelConfig resolve_model_config(model::ModelConfig config, const data::ModalityFeatures& features,
                                        std::size_t n_classes);

/// Trains on the graph over the training rows; validates every epoch on the
/// graph rebuilt over train ∪ val. Returns the parameters of the epoch with
/// the lowest validation log-loss (earliest on ties).
/// Throws DivergenceError on a non-finite loss.
TrainResult train_model(const LabelledBlock& train, const LabelledBlock& val, std::size_t n_classes,
                        const graph::GraphConfig& graph_config, const model::ModelConfig& model_config,
                        const TrainConfig& config);
/// Same, selecting the train and val splits of `ds`.
TrainResult train_model(const data::Dataset& ds, const data::ModalityFeatures& features,
                        const graph::GraphConfig& graph_config, const model::ModelConfig& model_config,
                        const TrainConfig& config);

struct Prediction {
  Tensor probs;  ///< unseen rows × classes
  Tensor alpha;  ///< unseen rows × 3
};

/// Rebuilds the graph over train ∪ unseen and returns the unseen rows.
Prediction predict_unseen(const data::ModalityFeatures& train, const data::ModalityFeatures& unseen,
                          const graph::GraphConfig& graph_config, const model::MuGNetParams& params);

/// `epoch,train_loss,val_logloss,val_acc,lr,seconds`. The seconds column is
/// left blank unless `with_seconds`, keeping the file reproducible.
void write_history(std::ostream& out, std::span<const EpochRecord> history, bool with_seconds);
void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history, bool with_seconds);

/// Shortest round-trip decimal form used by every reproducible artifact.
std::string format_real(double v);

}  // namespace mug::train
