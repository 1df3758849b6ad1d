#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mug/autodiff.hpp"
#include "mug/tensor.hpp"

namespace mug::graph {
class ModalityGraph;
}

namespace mug::nn {

inline constexpr double kLeakySlope = 0.2;

/// One graph-attention layer. Head h projects with `proj[h]` (d_in×d_head)
/// and scores edges with `attn[h]` (d_head×2): column 0 weights the
/// receiving node, column 1 the neighbour.
struct GATLayerParams {
  std::vector<Tensor> proj;
  std::vector<Tensor> attn;
  double slope = kLeakySlope;

  std::size_t heads() const noexcept { return proj.size(); }
  std::size_t in_dim() const { return proj.at(0).rows(); }
  std::size_t head_dim() const { return proj.at(0).cols(); }
  std::size_t out_dim(bool final_layer) const { return final_layer ? head_dim() : heads() * head_dim(); }
  /// Throws ContractError on zero heads or inconsistent head shapes.
  void check() const;
};

/// dense(d_in→d_hidden) → leaky_relu → dense(d_hidden→d_out). Empty bias
/// tensors mean no bias.
struct MLPParams {
  Tensor w1;
  Tensor b1;
  Tensor w2;
  Tensor b2;
  double slope = kLeakySlope;

  void check() const;
};

enum class Activation { leaky_relu, tanh, softmax_rows, log_softmax_rows };

// Tape forms, used by the model.
Var dense_affine(Var x, Var w, std::optional<Var> b = std::nullopt);
Var activate(Var x, Activation kind, double slope = kLeakySlope);
/// Heads concatenated, or averaged when `final_layer`. No output nonlinearity.
Var gat_layer(const graph::ModalityGraph& g, Var h, std::span<const Var> proj,
              std::span<const Var> attn, double slope, bool final_layer);
Var mlp2(Var x, Var w1, std::optional<Var> b1, Var w2, std::optional<Var> b2, double slope);

// Value forms.
Tensor dense_affine(const Tensor& x, const Tensor& w, const Tensor* b = nullptr);
Tensor activate(const Tensor& x, Activation kind, double slope = kLeakySlope);
Tensor gat_layer_forward(const graph::ModalityGraph& g, const Tensor& h, const GATLayerParams& params,
                         bool final_layer);
Tensor mlp2_forward(const Tensor& x, const MLPParams& params);

/// Mean over rows of −log(p[target]) with p clipped to [1e-15, 1]. Rows must
/// sum to 1 within 1e-6; throws ContractError otherwise or on a bad target.
double cross_entropy_loss(const Tensor& probs, std::span<const std::size_t> targets);

}  // namespace mug::nn
