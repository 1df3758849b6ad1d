#include "mug/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "mug/error.hpp"

namespace mug::graph {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::tab: return "tab";
    case Modality::txt: return "txt";
    case Modality::img: return "img";
  }
  return "?";
}

std::string to_string(Similarity s) {
  switch (s) {
    case Similarity::cosine: return "cosine";
    case Similarity::rbf: return "rbf";
    case Similarity::knn: return "knn";
  }
  return "?";
}

Similarity parse_similarity(const std::string& name) {
  if (name == "cosine") return Similarity::cosine;
  if (name == "rbf") return Similarity::rbf;
  if (name == "knn") return Similarity::knn;
  throw ConfigError("unknown similarity family '" + name + "' (expected cosine, rbf or knn)");
}

void LayerConfig::validate() const {
  if (sim == Similarity::knn) {
    if (k == 0) throw ConfigError("knn requires k >= 1");
    return;
  }
  if (!(spy > 0.0 && spy < 1.0)) throw ConfigError("spy must lie in (0,1)");
  if (sim == Similarity::rbf && rbf_gamma && !(*rbf_gamma > 0.0))
    throw ConfigError("rbf gamma must be positive");
}

std::string LayerConfig::describe() const {
  std::ostringstream s;
  s << to_string(sim);
  if (sim == Similarity::knn) s << ":k=" << k;
  else s << ":spy=" << spy;
  if (sim == Similarity::rbf) {
    if (rbf_gamma) s << ":gamma=" << *rbf_gamma;
    else if (gamma_rule == GammaRule::median_distance) s << ":gamma=median";
  }
  return s.str();
}

const LayerConfig& GraphConfig::layer(Modality m) const {
  switch (m) {
    case Modality::tab: return tab;
    case Modality::txt: return txt;
    case Modality::img: return img;
  }
  throw ContractError("bad modality");
}

LayerConfig& GraphConfig::layer(Modality m) {
  return const_cast<LayerConfig&>(static_cast<const GraphConfig&>(*this).layer(m));
}

void GraphConfig::validate() const {
  tab.validate();
  txt.validate();
  img.validate();
}

ModalityGraph::ModalityGraph(std::size_t node_count) : adj_(node_count) {
  for (std::size_t i = 0; i < node_count; ++i) adj_[i].push_back(i);
}

ModalityGraph ModalityGraph::from_edges(std::size_t node_count,
                                        std::span<const std::pair<std::size_t, std::size_t>> edges) {
  ModalityGraph g(node_count);
  for (auto [i, j] : edges) {
    if (i >= node_count || j >= node_count)
      throw ContractError("edge endpoint out of range for " + std::to_string(node_count) + " nodes");
    if (i == j) continue;
    g.adj_[i].push_back(j);
    g.adj_[j].push_back(i);
  }
  for (auto& nb : g.adj_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return g;
}

bool ModalityGraph::has_edge(std::size_t i, std::size_t j) const {
  const auto& nb = adj_.at(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<std::pair<std::size_t, std::size_t>> ModalityGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < adj_.size(); ++i)
    for (auto j : adj_[i])
      if (j > i) out.emplace_back(i, j);
  return out;
}

std::size_t ModalityGraph::edge_count() const { return (entry_count() - adj_.size()) / 2; }

std::size_t ModalityGraph::entry_count() const {
  std::size_t n = 0;
  for (const auto& nb : adj_) n += nb.size();
  return n;
}

ModalityGraph ModalityGraph::induced(std::span<const std::size_t> nodes) const {
  constexpr auto absent = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(adj_.size(), absent);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] >= adj_.size() || (k > 0 && nodes[k] <= nodes[k - 1]))
      throw ContractError("induced subgraph needs strictly increasing in-range nodes");
    remap[nodes[k]] = k;
  }
  ModalityGraph g;
  g.adj_.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k)
    for (auto j : adj_[nodes[k]])
      if (remap[j] != absent) g.adj_[k].push_back(remap[j]);
  return g;
}

void ModalityGraph::check_invariants() const {
  const auto n = adj_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = adj_[i];
    if (!std::is_sorted(nb.begin(), nb.end()) || std::adjacent_find(nb.begin(), nb.end()) != nb.end())
      throw ContractError("neighbour list not sorted and unique at node " + std::to_string(i));
    if (!std::binary_search(nb.begin(), nb.end(), i))
      throw ContractError("missing self-loop at node " + std::to_string(i));
    for (auto j : nb) {
      if (j >= n) throw ContractError("edge endpoint out of range");
      if (!has_edge(j, i)) throw ContractError("asymmetric adjacency");
    }
  }
}

const ModalityGraph& MultiplexGraph::layer(Modality m) const {
  switch (m) {
    case Modality::tab: return tab;
    case Modality::txt: return txt;
    case Modality::img: return img;
  }
  throw ContractError("bad modality");
}

ModalityGraph MultiplexGraph::union_graph() const {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (auto m : kModalities) {
    auto e = layer(m).edges();
    all.insert(all.end(), e.begin(), e.end());
  }
  return ModalityGraph::from_edges(node_count(), all);
}

MultiplexGraph MultiplexGraph::induced(std::span<const std::size_t> nodes) const {
  return {tab.induced(nodes), txt.induced(nodes), img.induced(nodes)};
}

void MultiplexGraph::check_invariants() const {
  if (txt.node_count() != tab.node_count() || img.node_count() != tab.node_count())
    throw ContractError("multiplex layers disagree on node count");
  tab.check_invariants();
  txt.check_invariants();
  img.check_invariants();
}

namespace {

double squared_distance(const Tensor& f, std::size_t a, std::size_t b) {
  double s = 0.0;
  const auto ra = f.row(a), rb = f.row(b);
  for (std::size_t c = 0; c < ra.size(); ++c) {
    const double d = ra[c] - rb[c];
    s += d * d;
  }
  return s;
}

Tensor pairwise_squared_distances(const Tensor& f) {
  const auto n = f.rows();
  Tensor d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = squared_distance(f, i, j);
  return d;
}

ModalityGraph knn_graph(const Tensor& f, std::size_t k) {
  const auto n = f.rows();
  if (n <= 1) return ModalityGraph(n);
  if (k >= n) {
    spdlog::warn("knn: k={} >= N={}, clamping to {}", k, n, n - 1);
    k = n - 1;
  }
  const Tensor dist = pairwise_squared_distances(f);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(dist(i, j), j);
    // Pair ordering breaks distance ties by lower index.
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t r = 0; r < k; ++r) edges.emplace_back(i, cand[r].second);
  }
  return ModalityGraph::from_edges(n, edges);
}

ModalityGraph threshold_graph(const Tensor& scores, double spy) {
  const auto n = scores.rows();
  if (n <= 1) return ModalityGraph(n);
  const double cut = offdiag_quantile(scores, spy);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (scores(i, j) >= cut) edges.emplace_back(i, j);
  return ModalityGraph::from_edges(n, edges);
}

}  // namespace

Tensor similarity_scores(const Tensor& f, Similarity family, std::optional<double> gamma) {
  ensure_finite(f, "similarity_scores input");
  const auto n = f.rows();
  Tensor s(n, n, 0.0);
  switch (family) {
    case Similarity::cosine: {
      std::vector<double> norm(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double q = 0.0;
        for (double v : f.row(i)) q += v * v;
        norm[i] = std::sqrt(q);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          if (norm[i] == 0.0 || norm[j] == 0.0) continue;
          double dot = 0.0;
          const auto ri = f.row(i), rj = f.row(j);
          for (std::size_t c = 0; c < ri.size(); ++c) dot += ri[c] * rj[c];
          s(i, j) = s(j, i) = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
        }
      }
      break;
    }
    case Similarity::rbf: {
      if (!gamma || !(*gamma > 0.0)) throw ConfigError("rbf similarity requires a positive gamma");
      for (std::size_t i = 0; i < n; ++i) {
        s(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) s(i, j) = s(j, i) = std::exp(-*gamma * squared_distance(f, i, j));
      }
      break;
    }
    case Similarity::knn: {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s(i, j) = s(j, i) = -std::sqrt(squared_distance(f, i, j));
      break;
    }
  }
  return s;
}

double resolve_gamma(const Tensor& f, const LayerConfig& layer) {
  if (layer.rbf_gamma) {
    if (!(*layer.rbf_gamma > 0.0)) throw ConfigError("rbf gamma must be positive");
    return *layer.rbf_gamma;
  }
  const double inverse_dim = f.cols() > 0 ? 1.0 / static_cast<double>(f.cols()) : 1.0;
  if (layer.gamma_rule == GammaRule::inverse_dim || f.rows() < 2) return inverse_dim;
  std::vector<double> d;
  d.reserve(f.rows() * (f.rows() - 1) / 2);
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = i + 1; j < f.rows(); ++j) d.push_back(squared_distance(f, i, j));
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? 1.0 / *mid : inverse_dim;
}

double offdiag_quantile(const Tensor& scores, double q) {
  const auto n = scores.rows();
  if (n < 2) throw ContractError("quantile of off-diagonal scores needs N >= 2");
  std::vector<double> v;
  v.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) v.push_back(scores(i, j));
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  // Exact at integral positions so equal neighbours reproduce their value.
  return frac == 0.0 ? v[lo] : v[lo] + frac * (v[hi] - v[lo]);
}

ModalityGraph build_adjacency(const Tensor& features, const LayerConfig& layer) {
  layer.validate();
  ensure_finite(features, "graph features");
  switch (layer.sim) {
    case Similarity::knn: return knn_graph(features, layer.k);
    case Similarity::cosine: return threshold_graph(similarity_scores(features, Similarity::cosine), layer.spy);
    case Similarity::rbf:
      return threshold_graph(similarity_scores(features, Similarity::rbf, resolve_gamma(features, layer)), layer.spy);
  }
  throw ContractError("bad similarity family");
}

MultiplexGraph build_multiplex_graph(const data::ModalityFeatures& features, const GraphConfig& config) {
  features.check();
  config.validate();
  return {build_adjacency(features.tab, config.tab), build_adjacency(features.txt, config.txt),
          build_adjacency(features.img, config.img)};
}

MultiplexGraph extend_inference_graph(const data::ModalityFeatures& train,
                                      const data::ModalityFeatures& all, const GraphConfig& config) {
  if (train.tab.cols() != all.tab.cols() || train.txt.cols() != all.txt.cols() ||
      train.img.cols() != all.img.cols())
    throw ContractError("feature dimensions differ between training and inference blocks");
  if (all.rows() < train.rows() ||
      !std::equal(train.row_ids.begin(), train.row_ids.end(), all.row_ids.begin()))
    throw ContractError("inference blocks must start with the training rows");
  return build_multiplex_graph(all, config);
}

void write_edge_list(std::ostream& out, const ModalityGraph& g) {
  out << "N " << g.node_count() << '\n';
  for (auto [i, j] : g.edges()) out << i << ' ' << j << '\n';
}

ModalityGraph read_edge_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("edge list: missing header");
  std::istringstream head(line);
  std::string tag;
  std::size_t n = 0;
  if (!(head >> tag >> n) || tag != "N") throw ParseError("edge list: header must be 'N <node_count>'", 1);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::size_t i = 0, j = 0;
    if (!(ls >> i >> j)) throw ParseError("edge list: expected 'i j'", row);
    if (i >= n || j >= n) throw ParseError("edge list: endpoint out of range", row);
    edges.emplace_back(i, j);
  }
  return ModalityGraph::from_edges(n, edges);
}

void write_edge_list(const std::filesystem::path& path, const ModalityGraph& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_edge_list(out, g);
}

ModalityGraph read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_edge_list(in);
}

void write_multiplex(const std::filesystem::path& dir, const MultiplexGraph& g) {
  std::filesystem::create_directories(dir);
  for (auto m : kModalities) write_edge_list(dir / (to_string(m) + ".edges"), g.layer(m));
}

MultiplexGraph read_multiplex(const std::filesystem::path& dir) {
  MultiplexGraph g{read_edge_list(dir / "tab.edges"), read_edge_list(dir / "txt.edges"),
                   read_edge_list(dir / "img.edges")};
  g.check_invariants();
  return g;
}

}  // namespace mug::graph
