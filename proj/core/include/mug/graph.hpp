#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mug/features.hpp"
#include "mug/tensor.hpp"

namespace mug::graph {

enum class Modality : std::uint8_t { tab, txt, img };
inline constexpr std::array<Modality, 3> kModalities{Modality::tab, Modality::txt, Modality::img};
std::string to_string(Modality m);

enum class Similarity : std::uint8_t { cosine, rbf, knn };
std::string to_string(Similarity s);
/// Throws ConfigError for unknown names.
Similarity parse_similarity(const std::string& name);

enum class GammaRule : std::uint8_t { inverse_dim, median_distance };

/// Sparsity is controlled by `spy` for score families and by `k` for knn;
/// the other field is ignored.
struct LayerConfig {
  Similarity sim = Similarity::knn;
  double spy = 0.75;
  std::size_t k = 10;
  std::optional<double> rbf_gamma;  ///< overrides gamma_rule when set
  GammaRule gamma_rule = GammaRule::inverse_dim;

  /// Throws ConfigError on spy ∉ (0,1), k = 0 or a non-positive gamma.
  void validate() const;
  std::string describe() const;
  bool operator==(const LayerConfig&) const = default;
};

struct GraphConfig {
  LayerConfig tab;
  LayerConfig txt;
  LayerConfig img;

  static GraphConfig shared(const LayerConfig& layer) { return {layer, layer, layer}; }
  const LayerConfig& layer(Modality m) const;
  LayerConfig& layer(Modality m);
  void validate() const;
  bool operator==(const GraphConfig&) const = default;
};

/// Undirected unweighted graph stored as sorted neighbour lists. Every node
/// lists itself; no list has duplicates; adjacency is symmetric.
class ModalityGraph {
 public:
  ModalityGraph() = default;
  /// Graph with only self-loops.
  explicit ModalityGraph(std::size_t node_count);
  /// Deduplicates, symmetrises and adds self-loops. Throws ContractError on
  /// an endpoint ≥ node_count.
  static ModalityGraph from_edges(std::size_t node_count,
                                  std::span<const std::pair<std::size_t, std::size_t>> edges);

  std::size_t node_count() const noexcept { return adj_.size(); }
  std::span<const std::size_t> neighbors(std::size_t i) const { return adj_.at(i); }
  bool has_edge(std::size_t i, std::size_t j) const;
  /// Undirected edges i < j, excluding self-loops, in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  std::size_t edge_count() const;
  /// Total directed entries including self-loops (the attention workload).
  std::size_t entry_count() const;

  /// Graph over `nodes` (strictly increasing) renumbered 0..size-1.
  ModalityGraph induced(std::span<const std::size_t> nodes) const;
  /// Throws ContractError if the representation invariants do not hold.
  void check_invariants() const;

  bool operator==(const ModalityGraph&) const = default;

 private:
  std::vector<std::vector<std::size_t>> adj_;
};

struct MultiplexGraph {
  ModalityGraph tab;
  ModalityGraph txt;
  ModalityGraph img;

  std::size_t node_count() const noexcept { return tab.node_count(); }
  const ModalityGraph& layer(Modality m) const;
  /// Edge union of the three layers.
  ModalityGraph union_graph() const;
  MultiplexGraph induced(std::span<const std::size_t> nodes) const;
  void check_invariants() const;
  bool operator==(const MultiplexGraph&) const = default;
};

/// Symmetric N×N similarity table. cosine: zero-norm rows score 0 against
/// everything (including themselves); rbf: exp(−γ‖u−v‖²); knn: negative
/// Euclidean distance. `gamma` is required for rbf and must be positive.
Tensor similarity_scores(const Tensor& features, Similarity family,
                         std::optional<double> gamma = std::nullopt);

/// The rbf bandwidth implied by a layer config for the given block.
double resolve_gamma(const Tensor& features, const LayerConfig& layer);

/// Linear-interpolated quantile of the off-diagonal upper-triangle scores.
double offdiag_quantile(const Tensor& scores, double q);

ModalityGraph build_adjacency(const Tensor& features, const LayerConfig& layer);
MultiplexGraph build_multiplex_graph(const data::ModalityFeatures& features, const GraphConfig& config);

/// Rebuilds the multiplex graph over `all`, whose leading rows must be the
/// rows of `train` (same ids, same widths).
MultiplexGraph extend_inference_graph(const data::ModalityFeatures& train,
                                      const data::ModalityFeatures& all, const GraphConfig& config);

/// Edge-list text format: first line `N <node_count>`, then one `i j` line
/// per undirected edge with i < j. Self-loops are implicit.
void write_edge_list(std::ostream& out, const ModalityGraph& g);
ModalityGraph read_edge_list(std::istream& in);
void write_edge_list(const std::filesystem::path& path, const ModalityGraph& g);
ModalityGraph read_edge_list(const std::filesystem::path& path);

/// `<dir>/tab.edges`, `<dir>/txt.edges`, `<dir>/img.edges`.
void write_multiplex(const std::filesystem::path& dir, const MultiplexGraph& g);
MultiplexGraph read_multiplex(const std::filesystem::path& dir);

}  // namespace mug::graph
