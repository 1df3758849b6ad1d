#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mug/graph.hpp"
#include "mug/trainer.hpp"

namespace mug::hpo {

struct HPOSpace {
  std::vector<graph::Similarity> families{graph::Similarity::cosine, graph::Similarity::rbf, graph::Similarity::knn};
  std::vector<double> spy_grid{0.5, 0.75, 0.95};
  std::vector<std::size_t> k_grid{5, 10, 32};
  /// false: one layer config shared by all modalities; true: the product
  /// of independent per-modality choices.
  bool per_modality = false;
  /// Maximum trials; 0 means the whole grid.
  std::size_t budget = 0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on empty grids or out-of-range values.
  void validate() const;
};

/// Every single-layer choice: each family crossed with its sparsity grid.
std::vector<graph::LayerConfig> layer_choices(const HPOSpace& space);
/// Full grid when it fits the budget, else a seeded uniform subsample kept in
/// grid order.
std::vector<graph::GraphConfig> enumerate_trials(const HPOSpace& space);

struct TrialOutcome {
  std::size_t index = 0;
  graph::GraphConfig config;
  std::optional<double> val_logloss;
  std::optional<double> val_accuracy;
  std::string error;  ///< set when the trial failed
};

struct HPOResult {
  std::size_t best_index = 0;  ///< index into trials
  graph::GraphConfig best_config;
  train::TrainResult best_result;
  std::vector<TrialOutcome> trials;
};

using TrialEvaluator = std::function<train::TrainResult(const graph::GraphConfig&, std::size_t trial_index)>;

/// Evaluates every trial and keeps the one with the lowest validation
/// log-loss at its selected epoch, then higher accuracy, then lower index.
/// Trials throwing mug::Error are recorded as failures; throws SearchError
/// when every trial fails.
HPOResult hpo_search(const HPOSpace& space, const TrialEvaluator& evaluate);

/// Trains each trial with `train_model`; trial i uses seed
/// derive_seed(config.seed, i).
HPOResult hpo_search(const train::LabelledBlock& train, const train::LabelledBlock& val, std::size_t n_classes,
                     const HPOSpace& space, const model::ModelConfig& model_config,
                     const train::TrainConfig& config);

}  // namespace mug::hpo
