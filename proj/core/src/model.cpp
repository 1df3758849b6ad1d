#include "mug/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mug/error.hpp"
#include "mug/rng.hpp"

namespace mug::model {

namespace {

constexpr std::array<const char*, 3> kInputKeys{"input_dim.tab", "input_dim.txt", "input_dim.img"};

std::size_t layer_in_dim(const ModelConfig& c, std::size_t m, std::size_t layer) {
  return layer == 0 ? c.input_dims[m] : c.hidden_dim;
}

std::size_t layer_head_dim(const ModelConfig& c, std::size_t layer) {
  return layer + 1 == c.gat_layers ? c.hidden_dim : c.hidden_dim / c.heads;
}

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(1, rows + cols)));
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

std::size_t as_size(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  const auto v = kv.get_int(key);
  if (!v) return fallback;
  if (*v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(*v);
}

}  // namespace

void ModelConfig::validate() const {
  if (gat_layers == 0) throw ConfigError("model needs at least one GAT layer");
  if (heads == 0) throw ConfigError("model needs at least one attention head");
  if (hidden_dim == 0 || attention_dim == 0) throw ConfigError("model dimensions must be positive");
  if (hidden_dim % heads != 0)
    throw ConfigError("hidden_dim (" + std::to_string(hidden_dim) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  if (n_classes < 1) throw ConfigError("model needs at least one class");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("leaky slope must lie in [0,1)");
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& kv, const std::string& prefix) {
  ModelConfig c;
  c.gat_layers = as_size(kv, prefix + "gat_layers", c.gat_layers);
  c.heads = as_size(kv, prefix + "heads", c.heads);
  c.hidden_dim = as_size(kv, prefix + "hidden_dim", c.hidden_dim);
  c.attention_dim = as_size(kv, prefix + "attention_dim", c.attention_dim);
  c.classifier_hidden = as_size(kv, prefix + "classifier_hidden", c.classifier_hidden);
  c.n_classes = as_size(kv, prefix + "n_classes", c.n_classes);
  for (std::size_t m = 0; m < 3; ++m) c.input_dims[m] = as_size(kv, prefix + kInputKeys[m], c.input_dims[m]);
  if (auto s = kv.get_double(prefix + "slope")) c.slope = *s;
  return c;
}

void ModelConfig::to_config(KeyValueConfig& kv, const std::string& prefix) const {
  kv.set(prefix + "gat_layers", std::to_string(gat_layers));
  kv.set(prefix + "heads", std::to_string(heads));
  kv.set(prefix + "hidden_dim", std::to_string(hidden_dim));
  kv.set(prefix + "attention_dim", std::to_string(attention_dim));
  kv.set(prefix + "classifier_hidden", std::to_string(classifier_hidden));
  kv.set(prefix + "n_classes", std::to_string(n_classes));
  for (std::size_t m = 0; m < 3; ++m) kv.set(prefix + kInputKeys[m], std::to_string(input_dims[m]));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", slope);
  kv.set(prefix + "slope", buf);
}

MuGNetParams MuGNetParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  MuGNetParams p;
  p.config = config;
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t l = 0; l < config.gat_layers; ++l) {
      nn::GATLayerParams layer;
      layer.slope = config.slope;
      const auto in = layer_in_dim(config, m, l);
      const auto hd = layer_head_dim(config, l);
      for (std::size_t h = 0; h < config.heads; ++h) {
        layer.proj.emplace_back(in, hd);
        layer.attn.emplace_back(hd, 2);
      }
      p.encoders[m].push_back(std::move(layer));
    }
    p.fuse_proj[m] = Tensor(config.hidden_dim, config.attention_dim);
  }
  p.fuse_vec = Tensor(config.attention_dim, 1);
  const auto width = config.classifier_width();
  p.classifier.slope = config.slope;
  p.classifier.w1 = Tensor(config.hidden_dim, width);
  p.classifier.b1 = Tensor(1, width);
  p.classifier.w2 = Tensor(width, config.n_classes);
  p.classifier.b2 = Tensor(1, config.n_classes);

  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  for (Tensor* t : p.tensors()) {
    if (t == &p.classifier.b1 || t == &p.classifier.b2) continue;
    *t = glorot(t->rows(), t->cols(), rng);
  }
  return p;
}

std::vector<Tensor*> MuGNetParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& enc : encoders)
    for (auto& layer : enc)
      for (std::size_t h = 0; h < layer.heads(); ++h) {
        out.push_back(&layer.proj[h]);
        out.push_back(&layer.attn[h]);
      }
  for (auto& f : fuse_proj) out.push_back(&f);
  out.push_back(&fuse_vec);
  out.push_back(&classifier.w1);
  out.push_back(&classifier.b1);
  out.push_back(&classifier.w2);
  out.push_back(&classifier.b2);
  return out;
}

std::vector<const Tensor*> MuGNetParams::tensors() const {
  auto mut = const_cast<MuGNetParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> MuGNetParams::names() const {
  std::vector<std::string> out;
  for (std::size_t m = 0; m < 3; ++m) {
    const auto mod = graph::to_string(graph::kModalities[m]);
    for (std::size_t l = 0; l < encoders[m].size(); ++l)
      for (std::size_t h = 0; h < encoders[m][l].heads(); ++h) {
        const auto base = "encoder." + mod + ".layer" + std::to_string(l) + ".head" + std::to_string(h);
        out.push_back(base + ".proj");
        out.push_back(base + ".attn");
      }
  }
  for (auto m : graph::kModalities) out.push_back("fusion." + graph::to_string(m) + ".proj");
  out.push_back("fusion.vec");
  out.insert(out.end(), {"classifier.w1", "classifier.b1", "classifier.w2", "classifier.b2"});
  return out;
}

std::size_t MuGNetParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

std::vector<nn::NamedTensor> MuGNetParams::to_named() const {
  const auto ts = tensors();
  const auto ns = names();
  std::vector<nn::NamedTensor> out;
  for (std::size_t k = 0; k < ts.size(); ++k) out.push_back({ns[k], *ts[k]});
  return out;
}

MuGNetParams MuGNetParams::from_named(const ModelConfig& config, const std::vector<nn::NamedTensor>& named) {
  MuGNetParams p = init(config, 0);
  auto ts = p.tensors();
  const auto ns = p.names();
  if (named.size() != ts.size())
    throw ContractError("checkpoint holds " + std::to_string(named.size()) + " tensors, model expects " +
                        std::to_string(ts.size()));
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (named[k].name != ns[k]) throw ContractError("checkpoint tensor " + std::to_string(k) + " is '" + named[k].name + "', expected '" + ns[k] + "'");
    if (!named[k].value.same_shape(*ts[k])) throw ContractError("checkpoint tensor '" + ns[k] + "' has the wrong shape");
    *ts[k] = named[k].value;
  }
  return p;
}

bool MuGNetParams::operator==(const MuGNetParams& other) const {
  if (!(config == other.config)) return false;
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!(*a[k] == *b[k])) return false;
  return true;
}

TapeForward forward_on_tape(nn::Tape& tape, const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                            const MuGNetParams& params, std::span<const nn::Var> vars) {
  const auto& cfg = params.config;
  if (vars.size() != params.tensors().size()) throw ContractError("forward: one Var per parameter tensor required");
  if (g.node_count() != features.rows())
    throw ContractError("forward: graph has " + std::to_string(g.node_count()) + " nodes, features have " +
                        std::to_string(features.rows()) + " rows");
  const std::array<const Tensor*, 3> blocks{&features.tab, &features.txt, &features.img};
  std::size_t cursor = 0;
  TapeForward out;
  for (std::size_t m = 0; m < 3; ++m) {
    if (blocks[m]->cols() != cfg.input_dims[m])
      throw ContractError("forward: " + graph::to_string(graph::kModalities[m]) + " features have width " +
                          std::to_string(blocks[m]->cols()) + ", model expects " +
                          std::to_string(cfg.input_dims[m]));
    const auto& layer_graph = g.layer(graph::kModalities[m]);
    nn::Var h = tape.constant(*blocks[m]);
    const auto& enc = params.encoders[m];
    for (std::size_t l = 0; l < enc.size(); ++l) {
      std::vector<nn::Var> proj, attn;
      for (std::size_t k = 0; k < enc[l].heads(); ++k) {
        proj.push_back(vars[cursor++]);
        attn.push_back(vars[cursor++]);
      }
      const bool final_layer = l + 1 == enc.size();
      h = nn::gat_layer(layer_graph, h, proj, attn, enc[l].slope, final_layer);
      if (!final_layer) h = nn::leaky_relu(h, cfg.slope);
    }
    out.embeddings[m] = h;
  }
  std::array<nn::Var, 3> fuse_proj{vars[cursor], vars[cursor + 1], vars[cursor + 2]};
  cursor += 3;
  const nn::Var fuse_vec = vars[cursor++];
  std::array<nn::Var, 3> logits;
  for (std::size_t m = 0; m < 3; ++m)
    logits[m] = nn::matmul(nn::tanh(nn::matmul(out.embeddings[m], fuse_proj[m])), fuse_vec);
  out.alpha = nn::softmax_rows(nn::concat_cols(logits));
  out.fused = nn::scale_rows(out.embeddings[0], nn::slice_cols(out.alpha, 0, 1));
  for (std::size_t m = 1; m < 3; ++m)
    out.fused = nn::add(out.fused, nn::scale_rows(out.embeddings[m], nn::slice_cols(out.alpha, m, 1)));

  const nn::Var w1 = vars[cursor], b1 = vars[cursor + 1], w2 = vars[cursor + 2], b2 = vars[cursor + 3];
  out.probs = nn::softmax_rows(nn::mlp2(out.fused, w1, b1, w2, b2, params.classifier.slope));
  return out;
}

namespace {

std::vector<nn::Var> constants(nn::Tape& tape, const MuGNetParams& params) {
  std::vector<nn::Var> vars;
  for (const Tensor* t : params.tensors()) vars.push_back(tape.constant(*t));
  return vars;
}

}  // namespace

std::array<Tensor, 3> encode_modalities(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                                        const MuGNetParams& params) {
  nn::Tape tape;
  const auto vars = constants(tape, params);
  const auto fwd = forward_on_tape(tape, g, features, params, vars);
  return {fwd.embeddings[0].value(), fwd.embeddings[1].value(), fwd.embeddings[2].value()};
}

FusionTrace attention_fuse(const Tensor& h_tab, const Tensor& h_txt, const Tensor& h_img,
                           const MuGNetParams& params) {
  if (!h_tab.same_shape(h_txt) || !h_tab.same_shape(h_img) || h_tab.cols() != params.config.hidden_dim)
    throw ContractError("attention_fuse: embeddings must share shape N x hidden_dim");
  nn::Tape tape;
  const std::array<nn::Var, 3> h{tape.constant(h_tab), tape.constant(h_txt), tape.constant(h_img)};
  const nn::Var vec = tape.constant(params.fuse_vec);
  std::array<nn::Var, 3> logits;
  for (std::size_t m = 0; m < 3; ++m)
    logits[m] = nn::matmul(nn::tanh(nn::matmul(h[m], tape.constant(params.fuse_proj[m]))), vec);
  const nn::Var alpha = nn::softmax_rows(nn::concat_cols(logits));
  nn::Var fused = nn::scale_rows(h[0], nn::slice_cols(alpha, 0, 1));
  for (std::size_t m = 1; m < 3; ++m) fused = nn::add(fused, nn::scale_rows(h[m], nn::slice_cols(alpha, m, 1)));
  return {alpha.value(), fused.value()};
}

Tensor classify_head(const Tensor& fused, const MuGNetParams& params) {
  if (fused.cols() != params.config.hidden_dim) throw ContractError("classify_head: input width must be hidden_dim");
  if (params.classifier.w2.cols() != params.config.n_classes)
    throw ContractError("classify_head: classifier output does not match n_classes");
  return nn::activate(nn::mlp2_forward(fused, params.classifier), nn::Activation::softmax_rows);
}

ForwardResult model_forward(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                            const MuGNetParams& params, std::optional<std::span<const std::size_t>> targets) {
  nn::Tape tape;
  const auto vars = constants(tape, params);
  const auto fwd = forward_on_tape(tape, g, features, params, vars);
  ForwardResult r{fwd.probs.value(), {fwd.alpha.value(), fwd.fused.value()}, std::nullopt};
  if (targets) r.loss = nn::cross_entropy(fwd.probs, *targets).value()[0];
  return r;
}

LossAndGrad loss_and_gradients(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                               const MuGNetParams& params, std::span<const std::size_t> rows,
                               std::span<const std::size_t> targets) {
  nn::Tape tape;
  std::vector<nn::Var> vars;
  for (const Tensor* t : params.tensors()) vars.push_back(tape.leaf(*t));
  const auto fwd = forward_on_tape(tape, g, features, params, vars);
  const nn::Var loss = nn::cross_entropy(nn::gather_rows(fwd.probs, rows), targets);
  tape.backward(loss);
  LossAndGrad out{loss.value()[0], {}};
  for (const auto& v : vars) out.grads.push_back(tape.grad(v));
  return out;
}

double loss_value(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                  const MuGNetParams& params, std::span<const std::size_t> rows,
                  std::span<const std::size_t> targets) {
  nn::Tape tape;
  const auto vars = constants(tape, params);
  const auto fwd = forward_on_tape(tape, g, features, params, vars);
  return nn::cross_entropy(nn::gather_rows(fwd.probs, rows), targets).value()[0];
}

void save_model(const std::filesystem::path& path, const MuGNetParams& params) {
  nn::write_checkpoint(path, params.to_named());
  KeyValueConfig kv;
  params.config.to_config(kv, "");
  std::ofstream out(path.string() + ".config");
  if (!out) throw Error("cannot write " + path.string() + ".config");
  kv.write(out);
}

MuGNetParams load_model(const std::filesystem::path& path) {
  const auto config = ModelConfig::from_config(KeyValueConfig::load(path.string() + ".config"), "");
  config.validate();
  return MuGNetParams::from_named(config, nn::read_checkpoint(path));
}

}  // namespace mug::model
