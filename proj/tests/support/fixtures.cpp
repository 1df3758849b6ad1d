#include "fixtures.hpp"

#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace mugtest {

mug::data::ModalityFeatures random_features(std::size_t n, std::array<std::size_t, 3> dims, mug::Rng& rng) {
  mug::data::ModalityFeatures f;
  std::array<mug::Tensor*, 3> blocks{&f.tab, &f.txt, &f.img};
  for (std::size_t m = 0; m < 3; ++m) {
    *blocks[m] = mug::Tensor(n, dims[m]);
    for (auto& v : blocks[m]->values()) v = rng.normal();
  }
  for (std::size_t i = 0; i < n; ++i) f.row_ids.push_back("r" + std::to_string(i));
  return f;
}

mug::graph::MultiplexGraph random_multiplex(std::size_t n, double p, mug::Rng& rng) {
  auto layer = [&] {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < p) edges.emplace_back(i, j);
    return mug::graph::ModalityGraph::from_edges(n, edges);
  };
  mug::graph::MultiplexGraph g;
  g.tab = layer();
  g.txt = layer();
  g.img = layer();
  return g;
}

mug::model::ModelConfig small_model(std::array<std::size_t, 3> dims, std::size_t classes) {
  mug::model::ModelConfig c;
  c.gat_layers = 2;
  c.heads = 2;
  c.hidden_dim = 6;
  c.attention_dim = 4;
  c.classifier_hidden = 5;
  c.n_classes = classes;
  c.input_dims = dims;
  return c;
}

}  // namespace mugtest

namespace mugtest {

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace mugtest
