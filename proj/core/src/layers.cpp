#include "mug/layers.hpp"

#include <cmath>
#include <string>

#include "mug/error.hpp"
#include "mug/graph.hpp"

namespace mug::nn {

void GATLayerParams::check() const {
  if (proj.empty()) throw ContractError("GAT layer needs at least one head");
  if (attn.size() != proj.size()) throw ContractError("GAT layer: one attention tensor per head");
  for (std::size_t h = 0; h < proj.size(); ++h) {
    if (proj[h].rows() != proj[0].rows() || proj[h].cols() != proj[0].cols())
      throw ContractError("GAT layer: head projections differ in shape");
    if (attn[h].rows() != proj[0].cols() || attn[h].cols() != 2)
      throw ContractError("GAT layer: attention tensor must be d_head x 2");
  }
}

void MLPParams::check() const {
  if (w1.cols() != w2.rows()) throw ContractError("MLP: hidden dimensions do not chain");
  if (!b1.empty() && (b1.rows() != 1 || b1.cols() != w1.cols())) throw ContractError("MLP: bad first bias");
  if (!b2.empty() && (b2.rows() != 1 || b2.cols() != w2.cols())) throw ContractError("MLP: bad second bias");
}

Var dense_affine(Var x, Var w, std::optional<Var> b) {
  Var y = matmul(x, w);
  return b ? add_row_bias(y, *b) : y;
}

Var activate(Var x, Activation kind, double slope) {
  switch (kind) {
    case Activation::leaky_relu: return leaky_relu(x, slope);
    case Activation::tanh: return tanh(x);
    case Activation::softmax_rows: return softmax_rows(x);
    case Activation::log_softmax_rows: return log_softmax_rows(x);
  }
  throw ContractError("unknown activation");
}

Var gat_layer(const graph::ModalityGraph& g, Var h, std::span<const Var> proj, std::span<const Var> attn,
              double slope, bool final_layer) {
  if (proj.empty() || proj.size() != attn.size()) throw ContractError("GAT layer: heads mismatch");
  if (g.node_count() != h.rows())
    throw ContractError("GAT layer: graph has " + std::to_string(g.node_count()) + " nodes, input has " +
                        std::to_string(h.rows()) + " rows");
  if (proj[0].rows() != h.cols())
    throw ContractError("GAT layer: input width " + std::to_string(h.cols()) + " does not match projection " +
                        std::to_string(proj[0].rows()));
  std::vector<Var> heads;
  heads.reserve(proj.size());
  for (std::size_t k = 0; k < proj.size(); ++k) {
    Var z = matmul(h, proj[k]);
    Var scores = matmul(z, attn[k]);
    heads.push_back(graph_attention(z, scores, g, slope));
  }
  if (heads.size() == 1) return heads[0];
  return final_layer ? average(heads) : concat_cols(heads);
}

Var mlp2(Var x, Var w1, std::optional<Var> b1, Var w2, std::optional<Var> b2, double slope) {
  return dense_affine(leaky_relu(dense_affine(x, w1, b1), slope), w2, b2);
}

Tensor dense_affine(const Tensor& x, const Tensor& w, const Tensor* b) {
  Tape t;
  std::optional<Var> bias;
  if (b) bias = t.constant(*b);
  return dense_affine(t.constant(x), t.constant(w), bias).value();
}

Tensor activate(const Tensor& x, Activation kind, double slope) {
  Tape t;
  return activate(t.constant(x), kind, slope).value();
}

Tensor gat_layer_forward(const graph::ModalityGraph& g, const Tensor& h, const GATLayerParams& params,
                         bool final_layer) {
  params.check();
  Tape t;
  std::vector<Var> proj, attn;
  for (std::size_t k = 0; k < params.heads(); ++k) {
    proj.push_back(t.constant(params.proj[k]));
    attn.push_back(t.constant(params.attn[k]));
  }
  return gat_layer(g, t.constant(h), proj, attn, params.slope, final_layer).value();
}

Tensor mlp2_forward(const Tensor& x, const MLPParams& params) {
  params.check();
  Tape t;
  std::optional<Var> b1, b2;
  if (!params.b1.empty()) b1 = t.constant(params.b1);
  if (!params.b2.empty()) b2 = t.constant(params.b2);
  return mlp2(t.constant(x), t.constant(params.w1), b1, t.constant(params.w2), b2, params.slope).value();
}

double cross_entropy_loss(const Tensor& probs, std::span<const std::size_t> targets) {
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double s = 0.0;
    for (double v : probs.row(r)) s += v;
    if (std::abs(s - 1.0) > 1e-6) throw ContractError("cross_entropy_loss: row " + std::to_string(r) + " does not sum to 1");
  }
  Tape t;
  return cross_entropy(t.constant(probs), targets).value()[0];
}

}  // namespace mug::nn
