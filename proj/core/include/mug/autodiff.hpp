#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mug/tensor.hpp"

namespace mug::graph {
class ModalityGraph;
}

namespace mug::nn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recorder. Values are appended in evaluation order; backward()
/// replays the recorded adjoint rules in reverse. A tape is single-use per
/// backward pass and not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var leaf(Tensor value);
  /// Leaf excluded from gradient bookkeeping.
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Accumulated adjoint; zeros before backward() or when unreachable.
  const Tensor& grad(Var v);

  /// Seeds d(out)/d(out) = 1 and propagates. `out` must be 1×1 and the
  /// tape must not have been run backward before.
  void backward(Var out);

  std::size_t size() const noexcept { return nodes_.size(); }

  using Rule = std::function<void(Tape&, std::size_t self)>;
  /// Records a computed value with its adjoint rule (which reads
  /// adjoint(self) and accumulates into its inputs via adjoint()).
  Var record(Tensor value, std::vector<std::size_t> inputs, Rule rule);
  /// Mutable adjoint buffer of node `id`, allocated on first use.
  Tensor& adjoint(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool has_grad = false;
    Rule rule;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Operations. All operands must live on the same tape. Shape errors throw
// ContractError; non-finite results throw NumericError.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal shapes.
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
/// x (N×C) plus bias (1×C) on every row.
Var add_row_bias(Var x, Var bias);
Var leaky_relu(Var x, double slope);
Var tanh(Var x);
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);
Var concat_cols(std::span<const Var> parts);
/// Columns [first, first+count).
Var slice_cols(Var x, std::size_t first, std::size_t count);
/// Elementwise mean of equal-shaped operands.
Var average(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const std::size_t> index);
/// out(i,j) = x(i,j)·w(i,0) for x N×C, w N×1.
Var scale_rows(Var x, Var w);
/// 1×1 sum of every entry.
Var sum(Var x);
/// 1×1 mean over rows of −log(max(p[target], 1e-15)).
Var cross_entropy(Var probs, std::span<const std::size_t> targets);

/// Graph-attention aggregation for one head. `z` is N×d projected features,
/// `scores` is N×2 with source and destination attention terms. For each node
/// i the logits leaky_relu(scores(i,0) + scores(j,1)) over j in the
/// neighbourhood of i are softmax-normalised and out_i = Σ_j coef_ij z_j.
/// The graph must outlive the tape.
Var graph_attention(Var z, Var scores, const graph::ModalityGraph& g, double slope);

/// Attention coefficients computed by graph_attention, in neighbour-list
/// order per node.
std::vector<std::vector<double>> attention_coefficients(const Tensor& scores,
                                                        const graph::ModalityGraph& g,
                                                        double slope);

}  // namespace mug::nn
