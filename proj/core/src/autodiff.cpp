#include "mug/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mug/error.hpp"
#include "mug/graph.hpp"

namespace mug::nn {

const Tensor& Var::value() const {
  if (!tape) throw ContractError("Var is not attached to a tape");
  return tape->value(*this);
}

Var Tape::leaf(Tensor value) {
  ensure_finite(value, "tape leaf");
  nodes_.push_back({std::move(value), {}, true, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  ensure_finite(value, "tape constant");
  nodes_.push_back({std::move(value), {}, false, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Rule rule) {
  bool needs = false;
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw ContractError("operand from a different tape");
    needs = needs || nodes_[id].needs_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, false, needs ? std::move(rule) : Rule{}});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::adjoint(std::size_t id) {
  auto& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return adjoint(v.id); }

void Tape::backward(Var out) {
  if (out.tape != this) throw ContractError("backward on a foreign Var");
  if (consumed_) throw ContractError("tape already ran backward");
  const auto& v = value(out);
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("backward needs a 1x1 output");
  consumed_ = true;
  adjoint(out.id)[0] = 1.0;
  for (std::size_t id = out.id + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.has_grad && n.rule) n.rule(*this, id);
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.tape || a.tape != b.tape) throw ContractError("operands live on different tapes");
  return *a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ContractError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

}  // namespace

Var matmul(Var a, Var b) {
  auto& t = same_tape(a, b);
  Tensor out = mug::matmul(a.value(), b.value());
  ensure_finite(out, "matmul");
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    if (t.needs_grad(a)) accumulate(t.adjoint(a), matmul_nt(g, t.value(Var{&t, b})));
    if (t.needs_grad(b)) accumulate(t.adjoint(b), matmul_tn(t.value(Var{&t, a}), g));
  });
}

Var add(Var a, Var b) {
  auto& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  ensure_finite(out, "add");
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    if (t.needs_grad(a)) accumulate(t.adjoint(a), g);
    if (t.needs_grad(b)) accumulate(t.adjoint(b), g);
  });
}

Var sub(Var a, Var b) {
  auto& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= b.value()[k];
  ensure_finite(out, "sub");
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    if (t.needs_grad(a)) accumulate(t.adjoint(a), g);
    if (t.needs_grad(b)) {
      Tensor& gb = t.adjoint(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
    }
  });
}

Var hadamard(Var a, Var b) {
  auto& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b.value()[k];
  ensure_finite(out, "hadamard");
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& va = t.value(Var{&t, a});
    const Tensor& vb = t.value(Var{&t, b});
    if (t.needs_grad(a)) {
      Tensor& ga = t.adjoint(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.adjoint(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  ensure_finite(out, "scale");
  return a.tape->record(std::move(out), {a.id}, [a = a.id, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    Tensor& ga = t.adjoint(a);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += factor * g[k];
  });
}

Var add_row_bias(Var x, Var bias) {
  auto& t = same_tape(x, bias);
  const Tensor& vx = x.value();
  const Tensor& vb = bias.value();
  if (vb.rows() != 1 || vb.cols() != vx.cols()) throw ContractError("add_row_bias: bias must be 1xC");
  Tensor out = vx;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += vb[c];
  ensure_finite(out, "add_row_bias");
  return t.record(std::move(out), {x.id, bias.id}, [x = x.id, b = bias.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    if (t.needs_grad(x)) accumulate(t.adjoint(x), g);
    if (t.needs_grad(b)) {
      Tensor& gb = t.adjoint(b);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
    }
  });
}

Var leaky_relu(Var x, double slope) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v >= 0.0 ? v : slope * v;
  return x.tape->record(std::move(out), {x.id}, [x = x.id, slope](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& vx = t.value(Var{&t, x});
    Tensor& gx = t.adjoint(x);
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += vx[k] >= 0.0 ? g[k] : slope * g[k];
  });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& y = t.value(Var{&t, self});
    Tensor& gx = t.adjoint(x);
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * (1.0 - y[k] * y[k]);
  });
}

namespace {

Tensor softmax_values(const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    if (in.empty()) continue;
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (out(r, c) = std::exp(in[c] - m));
    for (std::size_t c = 0; c < in.size(); ++c) out(r, c) /= z;
  }
  return out;
}

}  // namespace

Var softmax_rows(Var x) {
  Tensor out = softmax_values(x.value());
  ensure_finite(out, "softmax_rows");
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& y = t.value(Var{&t, self});
    Tensor& gx = t.adjoint(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Var x) {
  const Tensor& vx = x.value();
  Tensor out(vx.rows(), vx.cols());
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    const auto in = vx.row(r);
    if (in.empty()) continue;
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - m);
    const double lse = m + std::log(z);
    for (std::size_t c = 0; c < in.size(); ++c) out(r, c) = in[c] - lse;
  }
  ensure_finite(out, "log_softmax_rows");
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& y = t.value(Var{&t, self});
    Tensor& gx = t.adjoint(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) total += g(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  Tape& t = *parts[0].tape;
  const auto rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != rows) throw ContractError("concat_cols: row counts differ");
    cols += p.cols();
    ids.push_back(p.id);
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.cols();
  }
  auto inputs = ids;
  return t.record(std::move(out), std::move(inputs), [ids](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    std::size_t offset = 0;
    for (auto id : ids) {
      const auto w = t.value(Var{&t, id}).cols();
      if (t.needs_grad(id)) {
        Tensor& gi = t.adjoint(id);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) gi(r, c) += g(r, offset + c);
      }
      offset += w;
    }
  });
}

Var slice_cols(Var x, std::size_t first, std::size_t count) {
  const Tensor& vx = x.value();
  if (first + count > vx.cols()) throw ContractError("slice_cols: range exceeds width");
  Tensor out(vx.rows(), count);
  for (std::size_t r = 0; r < vx.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = vx(r, first + c);
  return x.tape->record(std::move(out), {x.id}, [x = x.id, first](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    Tensor& gx = t.adjoint(x);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, first + c) += g(r, c);
  });
}

Var average(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("average of nothing");
  Tape& t = *parts[0].tape;
  Tensor out(parts[0].rows(), parts[0].cols(), 0.0);
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    require_same_shape(out, p.value(), "average");
    accumulate(out, p.value());
    ids.push_back(p.id);
  }
  const double w = 1.0 / static_cast<double>(parts.size());
  for (auto& v : out.values()) v *= w;
  auto inputs = ids;
  return t.record(std::move(out), std::move(inputs), [ids, w](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    for (auto id : ids) {
      if (!t.needs_grad(id)) continue;
      Tensor& gi = t.adjoint(id);
      for (std::size_t k = 0; k < g.size(); ++k) gi[k] += w * g[k];
    }
  });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  for (auto i : index)
    if (i >= x.rows()) throw ContractError("gather_rows: index out of range");
  Tensor out = mug::gather_rows(x.value(), index);
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.tape->record(std::move(out), {x.id}, [x = x.id, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    Tensor& gx = t.adjoint(x);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(idx[k], c) += g(k, c);
  });
}

Var scale_rows(Var x, Var w) {
  auto& t = same_tape(x, w);
  const Tensor& vx = x.value();
  const Tensor& vw = w.value();
  if (vw.cols() != 1 || vw.rows() != vx.rows()) throw ContractError("scale_rows: weights must be Nx1");
  Tensor out = vx;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (auto& v : out.row(r)) v *= vw[r];
  ensure_finite(out, "scale_rows");
  return t.record(std::move(out), {x.id, w.id}, [x = x.id, w = w.id](Tape& t, std::size_t self) {
    const Tensor& g = t.adjoint(self);
    const Tensor& vx = t.value(Var{&t, x});
    const Tensor& vw = t.value(Var{&t, w});
    if (t.needs_grad(x)) {
      Tensor& gx = t.adjoint(x);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) * vw[r];
    }
    if (t.needs_grad(w)) {
      Tensor& gw = t.adjoint(w);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * vx(r, c);
        gw[r] += s;
      }
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape->record(Tensor(1, 1, s), {x.id}, [x = x.id](Tape& t, std::size_t self) {
    const double g = t.adjoint(self)[0];
    for (auto& v : t.adjoint(x).values()) v += g;
  });
}

namespace {
constexpr double kProbFloor = 1e-15;
}

Var cross_entropy(Var probs, std::span<const std::size_t> targets) {
  const Tensor& p = probs.value();
  if (targets.size() != p.rows()) throw ContractError("cross_entropy: one target per row required");
  if (p.rows() == 0) throw ContractError("cross_entropy of an empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    if (targets[r] >= p.cols())
      throw ContractError("cross_entropy: target " + std::to_string(targets[r]) + " out of range");
    total -= std::log(std::clamp(p(r, targets[r]), kProbFloor, 1.0));
  }
  const double n = static_cast<double>(p.rows());
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return probs.tape->record(Tensor(1, 1, total / n), {probs.id},
                            [pid = probs.id, tg = std::move(tg), n](Tape& t, std::size_t self) {
                              const double g = t.adjoint(self)[0];
                              const Tensor& p = t.value(Var{&t, pid});
                              Tensor& gp = t.adjoint(pid);
                              for (std::size_t r = 0; r < tg.size(); ++r) {
                                const double pr = p(r, tg[r]);
                                // Flat below the clip floor.
                                if (pr > kProbFloor) gp(r, tg[r]) -= g / (n * pr);
                              }
                            });
}

namespace {

void require_attention_inputs(const Tensor& z, const Tensor& scores, const graph::ModalityGraph& g) {
  if (scores.cols() != 2 || scores.rows() != z.rows())
    throw ContractError("graph_attention: scores must be Nx2 aligned with z");
  if (g.node_count() != z.rows())
    throw ContractError("graph_attention: graph has " + std::to_string(g.node_count()) +
                        " nodes but features have " + std::to_string(z.rows()) + " rows");
}

}  // namespace

std::vector<std::vector<double>> attention_coefficients(const Tensor& scores,
                                                        const graph::ModalityGraph& g,
                                                        double slope) {
  std::vector<std::vector<double>> coef(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) throw ContractError("graph_attention: node " + std::to_string(i) + " has no neighbours");
    auto& c = coef[i];
    c.resize(nb.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double pre = scores(i, 0) + scores(nb[k], 1);
      c[k] = pre >= 0.0 ? pre : slope * pre;
      m = std::max(m, c[k]);
    }
    double z = 0.0;
    for (auto& v : c) z += (v = std::exp(v - m));
    for (auto& v : c) v /= z;
  }
  return coef;
}

Var graph_attention(Var z, Var scores, const graph::ModalityGraph& g, double slope) {
  auto& t = same_tape(z, scores);
  const Tensor& vz = z.value();
  const Tensor& vs = scores.value();
  require_attention_inputs(vz, vs, g);
  const auto coef = attention_coefficients(vs, g, slope);
  Tensor out(vz.rows(), vz.cols(), 0.0);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto nb = g.neighbors(i);
    auto oi = out.row(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const auto zj = vz.row(nb[k]);
      for (std::size_t c = 0; c < oi.size(); ++c) oi[c] += coef[i][k] * zj[c];
    }
  }
  ensure_finite(out, "graph_attention");
  return t.record(std::move(out), {z.id, scores.id},
                  [zid = z.id, sid = scores.id, gp = &g, slope, coef](Tape& t, std::size_t self) {
                    const Tensor& go = t.adjoint(self);
                    const Tensor& vz = t.value(Var{&t, zid});
                    const Tensor& vs = t.value(Var{&t, sid});
                    Tensor dz(vz.rows(), vz.cols(), 0.0);
                    Tensor ds(vs.rows(), 2, 0.0);
                    std::vector<double> dcoef;
                    for (std::size_t i = 0; i < gp->node_count(); ++i) {
                      const auto nb = gp->neighbors(i);
                      const auto gi = go.row(i);
                      dcoef.assign(nb.size(), 0.0);
                      double weighted = 0.0;
                      for (std::size_t k = 0; k < nb.size(); ++k) {
                        const auto zj = vz.row(nb[k]);
                        auto dzj = dz.row(nb[k]);
                        double d = 0.0;
                        for (std::size_t c = 0; c < gi.size(); ++c) {
                          d += gi[c] * zj[c];
                          dzj[c] += coef[i][k] * gi[c];
                        }
                        dcoef[k] = d;
                        weighted += coef[i][k] * d;
                      }
                      for (std::size_t k = 0; k < nb.size(); ++k) {
                        const double pre = vs(i, 0) + vs(nb[k], 1);
                        const double dlogit = coef[i][k] * (dcoef[k] - weighted) * (pre >= 0.0 ? 1.0 : slope);
                        ds(i, 0) += dlogit;
                        ds(nb[k], 1) += dlogit;
                      }
                    }
                    if (t.needs_grad(zid)) accumulate(t.adjoint(zid), dz);
                    if (t.needs_grad(sid)) accumulate(t.adjoint(sid), ds);
                  });
}

}  // namespace mug::nn
