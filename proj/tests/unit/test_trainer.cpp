#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "fixtures.hpp"

#include "mug/error.hpp"
#include "mug/hpo.hpp"
#include "mug/rng.hpp"
#include "mug/trainer.hpp"

using namespace mug;
using namespace mug::train;

namespace {

constexpr std::array<std::size_t, 3> kDims{4, 3, 3};

/// Three well-separated clusters; every modality carries the cluster signal.
LabelledBlock clustered_block(std::size_t n, std::uint64_t seed, std::size_t classes = 3) {
  Rng rng(seed);
  LabelledBlock b{mugtest::random_features(n, kDims, rng), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % classes;
    b.labels.push_back(c);
    for (Tensor* t : {&b.features.tab, &b.features.txt, &b.features.img}) {
      for (std::size_t j = 0; j < t->cols(); ++j) (*t)(i, j) *= 0.3;
      (*t)(i, c % t->cols()) += 3.0;
    }
  }
  return b;
}

graph::GraphConfig knn(std::size_t k) {
  return graph::GraphConfig::shared({graph::Similarity::knn, 0.75, k, std::nullopt, graph::GammaRule::inverse_dim});
}

model::ModelConfig tiny_model() { return mugtest::small_model(kDims, 3); }

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 1) {
  TrainConfig c;
  c.epochs = epochs;
  c.patience = epochs;
  c.lr_max = 0.01;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(CosineSchedule, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_annealing_lr(0, 100, 1e-3, 1e-5), 1e-3);
  EXPECT_NEAR(cosine_annealing_lr(50, 100, 1e-3, 1e-5), (1e-3 + 1e-5) / 2.0, 1e-15);
  EXPECT_NEAR(cosine_annealing_lr(100, 100, 1e-3, 1e-5), 1e-5, 1e-18);
}

TEST(CosineSchedule, MonotoneNonIncreasing) {
  double prev = cosine_annealing_lr(0, 37, 0.5, 0.01);
  for (std::size_t t = 1; t <= 37; ++t) {
    const double lr = cosine_annealing_lr(t, 37, 0.5, 0.01);
    EXPECT_LE(lr, prev + 1e-15);
    EXPECT_GE(lr, 0.01 - 1e-15);
    prev = lr;
  }
}

TEST(AdamW, ZeroGradientWithoutDecayLeavesParams) {
  Tensor p{{1.5, -2.0}};
  std::vector<Tensor*> ps{&p};
  auto state = AdamState::zeros_like(ps);
  const std::vector<Tensor> g{Tensor(1, 2)};
  adamw_step(ps, g, state, 0.1, {0.9, 0.999, 1e-8, 0.0});
  EXPECT_EQ(p, (Tensor{{1.5, -2.0}}));
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamW, ZeroGradientWithDecayScalesParams) {
  Tensor p{{2.0, -4.0}};
  std::vector<Tensor*> ps{&p};
  auto state = AdamState::zeros_like(ps);
  const std::vector<Tensor> g{Tensor(1, 2)};
  adamw_step(ps, g, state, 1e-3, {0.9, 0.999, 1e-8, 0.01});
  EXPECT_DOUBLE_EQ(p(0, 0), 2.0 * (1.0 - 1e-5));
  EXPECT_DOUBLE_EQ(p(0, 1), -4.0 * (1.0 - 1e-5));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Tensor p{{0.0, 0.0}};
  std::vector<Tensor*> ps{&p};
  auto state = AdamState::zeros_like(ps);
  const std::vector<Tensor> g{Tensor{{3.0, -0.2}}};
  adamw_step(ps, g, state, 0.01, {0.9, 0.999, 1e-8, 0.0});
  EXPECT_NEAR(p(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(p(0, 1), 0.01, 1e-9);
}

TEST(AdamW, ShapeMismatchIsContractError) {
  Tensor p(2, 2);
  std::vector<Tensor*> ps{&p};
  auto state = AdamState::zeros_like(ps);
  const std::vector<Tensor> g{Tensor(1, 2)};
  EXPECT_THROW(adamw_step(ps, g, state, 0.1, {}), ContractError);
}

TEST(RandomWalk, FullRootsWithoutStepsGiveAllNodes) {
  Rng rng(1);
  const auto g = mugtest::random_multiplex(17, 0.2, rng).tab;
  const auto sub = sample_random_walk_subgraph(g, 1.0, 0, rng);
  ASSERT_EQ(sub.nodes.size(), 17u);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(sub.nodes[i], i);
  EXPECT_EQ(sub.graph.edge_count(), g.edge_count());
}

TEST(RandomWalk, PathFromEndVisitsEveryNode) {
  const auto g = graph::ModalityGraph::from_edges(3, std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}});
  Rng rng(2);
  const std::vector<std::size_t> root{0};
  // From 0 the only other neighbour is 1; from 1 the walk goes to 0 or 2.
  std::set<std::vector<std::size_t>> seen;
  for (int t = 0; t < 50; ++t) seen.insert(random_walk_nodes(g, root, 2, rng));
  EXPECT_TRUE(seen.count({0, 1, 2}));
  for (const auto& s : seen) {
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_TRUE(s == std::vector<std::size_t>({0, 1}) || s == std::vector<std::size_t>({0, 1, 2}));
  }
}

TEST(RandomWalk, IsolatedNodeStaysPut) {
  const graph::ModalityGraph g(4);
  Rng rng(3);
  const std::vector<std::size_t> roots{2};
  EXPECT_EQ(random_walk_nodes(g, roots, 5, rng), std::vector<std::size_t>{2});
}

TEST(RandomWalk, RootCountIsCeiling) {
  const graph::ModalityGraph g(10);
  Rng rng(4);
  EXPECT_EQ(sample_random_walk_subgraph(g, 0.25, 3, rng).nodes.size(), 3u);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.root_fraction = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lr_min = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  KeyValueConfig kv;
  c.to_config(kv);
  const auto back = TrainConfig::from_config(kv);
  EXPECT_EQ(back.lr_max, c.lr_max);
  EXPECT_EQ(back.epochs, c.epochs);
}

TEST(Training, FrozenWeightsStopAfterPatience) {
  auto cfg = quick(50);
  cfg.lr_max = 0.0;
  cfg.patience = 1;
  const auto tr = clustered_block(30, 5), va = clustered_block(9, 6);
  const auto r = train_model(tr, va, 3, knn(5), tiny_model(), cfg);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.selected_epoch, 1u);
  EXPECT_EQ(r.stop_reason, "patience");
}

TEST(Training, LossDropsOnSeparableFixture) {
  const auto tr = clustered_block(30, 7), va = clustered_block(12, 8);
  const auto r = train_model(tr, va, 3, knn(5), tiny_model(), quick(50));
  ASSERT_EQ(r.history.size(), 50u);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_LT(r.selected().val_logloss, r.history.front().val_logloss);
  for (const auto& e : r.history) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    EXPECT_GE(e.val_accuracy, 0.0);
    EXPECT_LE(e.val_accuracy, 1.0);
  }
  // The selected epoch is the earliest minimum of validation log-loss.
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    if (i + 1 < r.selected_epoch) EXPECT_GT(r.history[i].val_logloss, r.selected().val_logloss);
    else EXPECT_GE(r.history[i].val_logloss, r.selected().val_logloss);
  }
}

TEST(Training, SameSeedSameResult) {
  const auto tr = clustered_block(24, 9), va = clustered_block(9, 10);
  const auto a = train_model(tr, va, 3, knn(4), tiny_model(), quick(10, 3));
  const auto b = train_model(tr, va, 3, knn(4), tiny_model(), quick(10, 3));
  EXPECT_EQ(a.best, b.best);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
  std::ostringstream ha, hb;
  write_history(ha, a.history, false);
  write_history(hb, b.history, false);
  EXPECT_EQ(ha.str(), hb.str());
}

TEST(Training, EmptyValidationIsRejected) {
  const auto tr = clustered_block(12, 11);
  LabelledBlock empty{tr.features.subset(std::vector<std::size_t>{}), {}};
  EXPECT_THROW(train_model(tr, empty, 3, knn(3), tiny_model(), quick(3)), Error);
}

TEST(Prediction, UnseenRowsGetProbabilityRows) {
  const auto tr = clustered_block(24, 12);
  const auto params = model::MuGNetParams::init(resolve_model_config(tiny_model(), tr.features, 3), 12);
  const auto p = predict_unseen(tr.features, tr.features, knn(4), params);
  ASSERT_EQ(p.probs.rows(), 24u);
  ASSERT_TRUE(p.probs.all_finite());
  for (std::size_t i = 0; i < 24; ++i) {
    double s = 0.0, a = 0.0;
    for (double v : p.probs.row(i)) s += v;
    for (double v : p.alpha.row(i)) a += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(a, 1.0, 1e-12);
  }
}

TEST(Prediction, ZeroUnseenRowsGiveEmptyOutput) {
  const auto tr = clustered_block(12, 13);
  const auto params = model::MuGNetParams::init(resolve_model_config(tiny_model(), tr.features, 3), 13);
  const auto p = predict_unseen(tr.features, tr.features.subset(std::vector<std::size_t>{}), knn(3), params);
  EXPECT_EQ(p.probs.rows(), 0u);
  EXPECT_EQ(p.probs.cols(), 3u);
}

TEST(Prediction, DuplicateOfTrainedPointSharesArgmax) {
  const auto tr = clustered_block(30, 14), va = clustered_block(9, 15);
  const auto r = train_model(tr, va, 3, knn(5), tiny_model(), quick(60));
  const std::vector<std::size_t> pick{0, 1, 2};
  const auto dup = tr.features.subset(pick);
  const auto p = predict_unseen(tr.features, dup, knn(5), r.best);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto row = p.probs.row(i);
    const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    EXPECT_EQ(arg, tr.labels[i]);
  }
}

TEST(History, FormatAndSecondsColumn) {
  std::vector<EpochRecord> h{{1, 0.5, 0.25, 0.75, 0.001, 1.5}};
  std::ostringstream a, b;
  write_history(a, h, false);
  write_history(b, h, true);
  EXPECT_EQ(a.str(), "epoch,train_loss,val_logloss,val_acc,lr,seconds\n1,0.5,0.25,0.75,0.001,\n");
  EXPECT_EQ(b.str(), "epoch,train_loss,val_logloss,val_acc,lr,seconds\n1,0.5,0.25,0.75,0.001,1.5\n");
  EXPECT_EQ(format_real(0.1), "0.1");
}

namespace {

TrainResult rigged(double logloss, double accuracy) {
  TrainResult r;
  r.history.push_back({1, logloss, logloss, accuracy, 0.0, 0.0});
  r.selected_epoch = 1;
  return r;
}

}  // namespace

TEST(Hpo, GridSizes) {
  hpo::HPOSpace s;
  EXPECT_EQ(hpo::enumerate_trials(s).size(), 9u);
  s.per_modality = true;
  EXPECT_EQ(hpo::enumerate_trials(s).size(), 729u);
  s.budget = 1;
  EXPECT_EQ(hpo::enumerate_trials(s).size(), 1u);
  s.budget = 20;
  const auto a = hpo::enumerate_trials(s);
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a, hpo::enumerate_trials(s));
}

TEST(Hpo, InvalidSpaceIsConfigError) {
  hpo::HPOSpace s;
  s.spy_grid = {1.5};
  EXPECT_THROW(hpo::enumerate_trials(s), ConfigError);
  s = {};
  s.families.clear();
  EXPECT_THROW(hpo::enumerate_trials(s), ConfigError);
}

TEST(Hpo, SelectsLowestValidationLoss) {
  const auto r = hpo::hpo_search(hpo::HPOSpace{}, [](const graph::GraphConfig& g, std::size_t) {
    const bool target = g.tab.sim == graph::Similarity::knn && g.tab.k == 5;
    return rigged(target ? 0.1 : 0.5 + 0.01 * static_cast<double>(g.tab.k), 0.5);
  });
  EXPECT_EQ(r.best_config, knn(5));
  EXPECT_EQ(r.trials.size(), 9u);
  EXPECT_EQ(*r.trials[r.best_index].val_logloss, 0.1);
}

TEST(Hpo, TiesPreferAccuracyThenEarlierTrial) {
  const auto by_accuracy = hpo::hpo_search(hpo::HPOSpace{}, [](const graph::GraphConfig&, std::size_t i) {
    return rigged(0.3, i == 4 ? 0.9 : 0.5);
  });
  EXPECT_EQ(by_accuracy.best_index, 4u);
  const auto by_index =
      hpo::hpo_search(hpo::HPOSpace{}, [](const graph::GraphConfig&, std::size_t) { return rigged(0.3, 0.5); });
  EXPECT_EQ(by_index.best_index, 0u);
}

TEST(Hpo, FailedTrialsAreRecordedAndAllFailingThrows) {
  const auto r = hpo::hpo_search(hpo::HPOSpace{}, [](const graph::GraphConfig&, std::size_t i) {
    if (i != 2) throw DivergenceError("boom");
    return rigged(0.3, 0.5);
  });
  EXPECT_EQ(r.best_index, 2u);
  EXPECT_EQ(r.trials[0].error, "boom");
  EXPECT_THROW(hpo::hpo_search(hpo::HPOSpace{},
                               [](const graph::GraphConfig&, std::size_t) -> TrainResult {
                                 throw DivergenceError("boom");
                               }),
               SearchError);
}

TEST(Hpo, RealTrainingBudgetOne) {
  const auto tr = clustered_block(24, 16), va = clustered_block(9, 17);
  hpo::HPOSpace s;
  s.budget = 1;
  const auto r = hpo::hpo_search(tr, va, 3, s, tiny_model(), quick(5));
  EXPECT_EQ(r.trials.size(), 1u);
  EXPECT_TRUE(r.trials[0].val_logloss.has_value());
  EXPECT_EQ(r.best_result.history.size(), 5u);
}
