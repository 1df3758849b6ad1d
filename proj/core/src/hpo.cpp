#include "mug/hpo.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "mug/error.hpp"
#include "mug/rng.hpp"

namespace mug::hpo {

void HPOSpace::validate() const {
  if (families.empty()) throw ConfigError("HPO space has no similarity families");
  const bool scored = std::any_of(families.begin(), families.end(),
                                  [](graph::Similarity s) { return s != graph::Similarity::knn; });
  const bool knn = std::find(families.begin(), families.end(), graph::Similarity::knn) != families.end();
  if (scored && spy_grid.empty()) throw ConfigError("HPO space needs spy values for score-based families");
  if (knn && k_grid.empty()) throw ConfigError("HPO space needs k values for knn");
  for (double s : spy_grid)
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("spy values must lie in (0,1)");
  for (auto k : k_grid)
    if (k == 0) throw ConfigError("k values must be positive");
}

std::vector<graph::LayerConfig> layer_choices(const HPOSpace& space) {
  space.validate();
  std::vector<graph::LayerConfig> out;
  for (auto family : space.families) {
    if (family == graph::Similarity::knn) {
      for (auto k : space.k_grid) out.push_back({family, 0.75, k, std::nullopt, graph::GammaRule::inverse_dim});
    } else {
      for (double spy : space.spy_grid) out.push_back({family, spy, 10, std::nullopt, graph::GammaRule::inverse_dim});
    }
  }
  return out;
}

std::vector<graph::GraphConfig> enumerate_trials(const HPOSpace& space) {
  const auto choices = layer_choices(space);
  std::vector<graph::GraphConfig> grid;
  if (!space.per_modality) {
    for (const auto& c : choices) grid.push_back(graph::GraphConfig::shared(c));
  } else {
    for (const auto& a : choices)
      for (const auto& b : choices)
        for (const auto& c : choices) grid.push_back({a, b, c});
  }
  if (space.budget == 0 || grid.size() <= space.budget) return grid;

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(space.seed, 0x68706fULL));
  rng.shuffle(order.begin(), order.end());
  order.resize(space.budget);
  std::sort(order.begin(), order.end());
  std::vector<graph::GraphConfig> picked;
  for (auto i : order) picked.push_back(grid[i]);
  return picked;
}

HPOResult hpo_search(const HPOSpace& space, const TrialEvaluator& evaluate) {
  const auto trials = enumerate_trials(space);
  HPOResult out;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    TrialOutcome t{i, trials[i], std::nullopt, std::nullopt, {}};
    try {
      auto r = evaluate(trials[i], i);
      const auto& sel = r.selected();
      t.val_logloss = sel.val_logloss;
      t.val_accuracy = sel.val_accuracy;
      spdlog::info("trial {} [{} | {} | {}]: val log-loss {:.6f}, accuracy {:.4f}", i, trials[i].tab.describe(),
                   trials[i].txt.describe(), trials[i].img.describe(), *t.val_logloss, *t.val_accuracy);
      const bool better = !best || *t.val_logloss < *out.trials[*best].val_logloss ||
                          (*t.val_logloss == *out.trials[*best].val_logloss &&
                           *t.val_accuracy > *out.trials[*best].val_accuracy);
      if (better) {
        best = i;
        out.best_result = std::move(r);
      }
    } catch (const Error& e) {
      t.error = e.what();
      spdlog::warn("trial {} failed: {}", i, t.error);
    }
    out.trials.push_back(std::move(t));
  }
  if (!best) {
    std::string diag = "all " + std::to_string(trials.size()) + " HPO trials failed:";
    for (const auto& t : out.trials) diag += "\n  trial " + std::to_string(t.index) + ": " + t.error;
    throw SearchError(diag);
  }
  out.best_index = *best;
  out.best_config = trials[*best];
  return out;
}

HPOResult hpo_search(const train::LabelledBlock& train, const train::LabelledBlock& val, std::size_t n_classes,
                     const HPOSpace& space, const model::ModelConfig& model_config,
                     const train::TrainConfig& config) {
  return hpo_search(space, [&](const graph::GraphConfig& g, std::size_t index) {
    auto trial_config = config;
    trial_config.seed = derive_seed(config.seed, index);
    return train::train_model(train, val, n_classes, g, model_config, trial_config);
  });
}

}  // namespace mug::hpo
