#include <benchmark/benchmark.h>

#include "mug/graph.hpp"
#include "mug/layers.hpp"
#include "mug/model.hpp"
#include "mug/rng.hpp"
#include "mug/trainer.hpp"

namespace {

constexpr std::array<std::size_t, 3> kDims{16, 32, 32};

mug::data::ModalityFeatures features(std::size_t n, std::uint64_t seed) {
  mug::Rng rng(seed);
  mug::data::ModalityFeatures f;
  std::array<mug::Tensor*, 3> blocks{&f.tab, &f.txt, &f.img};
  for (std::size_t m = 0; m < 3; ++m) {
    *blocks[m] = mug::Tensor(n, kDims[m]);
    for (auto& v : blocks[m]->values()) v = rng.normal();
  }
  for (std::size_t i = 0; i < n; ++i) f.row_ids.push_back(std::to_string(i));
  return f;
}

mug::graph::GraphConfig knn10() {
  return mug::graph::GraphConfig::shared({mug::graph::Similarity::knn, 0.75, 10, std::nullopt,
                                          mug::graph::GammaRule::inverse_dim});
}

mug::model::ModelConfig model_config() {
  mug::model::ModelConfig c;
  c.input_dims = kDims;
  c.n_classes = 4;
  return c;
}

void BM_BuildGraph(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto f = features(n, 1);
  const auto sim = static_cast<mug::graph::Similarity>(state.range(1));
  auto cfg = knn10();
  cfg.tab.sim = cfg.txt.sim = cfg.img.sim = sim;
  for (auto _ : state) benchmark::DoNotOptimize(mug::graph::build_multiplex_graph(f, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildGraph)
    ->ArgsProduct({{250, 500, 1000},
                   {static_cast<int>(mug::graph::Similarity::cosine), static_cast<int>(mug::graph::Similarity::knn)}})
    ->Unit(benchmark::kMillisecond);

void BM_GatForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto f = features(n, 2);
  const auto g = mug::graph::build_multiplex_graph(f, knn10());
  const auto p = mug::model::MuGNetParams::init(model_config(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(mug::model::model_forward(g, f, p));
}
BENCHMARK(BM_GatForward)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  mug::train::LabelledBlock train{features(n, 3), {}}, val{features(n / 4, 4), {}};
  for (std::size_t i = 0; i < n; ++i) train.labels.push_back(i % 4);
  for (std::size_t i = 0; i < n / 4; ++i) val.labels.push_back(i % 4);
  mug::train::TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(mug::train::train_model(train, val, 4, knn10(), model_config(), cfg));
}
BENCHMARK(BM_TrainEpoch)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
