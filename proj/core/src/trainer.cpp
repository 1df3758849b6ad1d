#include "mug/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "mug/error.hpp"
#include "mug/stats.hpp"

namespace mug::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<double> parse_positive(const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !(v > 0.0) || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(root_fraction > 0.0 && root_fraction <= 1.0)) throw ConfigError("root_fraction must lie in (0,1]");
  if (lr_min > lr_max) throw ConfigError("lr_min must not exceed lr_max");
  if (lr_min < 0.0) throw ConfigError("learning rates must be non-negative");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (time_budget_seconds && !(*time_budget_seconds > 0.0)) throw ConfigError("time budget must be positive");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv, const std::string& prefix) {
  TrainConfig c;
  auto real = [&](const char* key, double& dst) {
    if (auto v = kv.get_double(prefix + key)) dst = *v;
  };
  auto count = [&](const char* key, std::size_t& dst) {
    if (auto v = kv.get_int(prefix + key)) {
      if (*v < 0) throw ConfigError(prefix + key + " must be non-negative");
      dst = static_cast<std::size_t>(*v);
    }
  };
  real("lr_max", c.lr_max);
  real("lr_min", c.lr_min);
  count("epochs", c.epochs);
  real("weight_decay", c.weight_decay);
  real("beta1", c.beta1);
  real("beta2", c.beta2);
  real("adam_eps", c.adam_eps);
  real("root_fraction", c.root_fraction);
  count("walk_length", c.walk_length);
  count("patience", c.patience);
  if (auto v = kv.get_int(prefix + "seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = kv.get_double(prefix + "time_budget_seconds")) c.time_budget_seconds = *v;
  return c;
}

void TrainConfig::to_config(KeyValueConfig& kv, const std::string& prefix) const {
  kv.set(prefix + "lr_max", format_real(lr_max));
  kv.set(prefix + "lr_min", format_real(lr_min));
  kv.set(prefix + "epochs", std::to_string(epochs));
  kv.set(prefix + "weight_decay", format_real(weight_decay));
  kv.set(prefix + "beta1", format_real(beta1));
  kv.set(prefix + "beta2", format_real(beta2));
  kv.set(prefix + "adam_eps", format_real(adam_eps));
  kv.set(prefix + "root_fraction", format_real(root_fraction));
  kv.set(prefix + "walk_length", std::to_string(walk_length));
  kv.set(prefix + "patience", std::to_string(patience));
  kv.set(prefix + "seed", std::to_string(seed));
  if (time_budget_seconds) kv.set(prefix + "time_budget_seconds", format_real(*time_budget_seconds));
}

std::optional<double> effective_time_budget(const TrainConfig& config) {
  if (config.time_budget_seconds) return config.time_budget_seconds;
  const char* env = std::getenv("MUG_TIME_BUDGET_SECONDS");
  if (!env || !*env) return std::nullopt;
  auto v = parse_positive(env);
  if (!v) throw ConfigError(std::string("MUG_TIME_BUDGET_SECONDS must be a positive number, got '") + env + "'");
  return v;
}

double cosine_annealing_lr(std::size_t t, std::size_t total, double lr_max, double lr_min) {
  if (total == 0) throw ContractError("cosine schedule needs at least one step");
  if (t > total) throw ContractError("cosine schedule step beyond the horizon");
  if (t == 0) return lr_max;
  if (t == total) return lr_min;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

AdamState AdamState::zeros_like(std::span<const Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->rows(), p->cols(), 0.0);
    s.v.emplace_back(p->rows(), p->cols(), 0.0);
  }
  return s;
}

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
                const AdamWHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ContractError("adamw_step: parameters, gradients and state disagree in count");
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p];
    const Tensor& g = grads[p];
    if (!theta.same_shape(g) || !theta.same_shape(state.m[p])) throw ContractError("adamw_step: shape mismatch");
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      theta[k] -= lr * hyper.weight_decay * theta[k] + lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

std::vector<std::size_t> random_walk_nodes(const graph::ModalityGraph& g, std::span<const std::size_t> roots,
                                           std::size_t walk_length, Rng& rng) {
  std::vector<char> seen(g.node_count(), 0);
  for (auto root : roots) {
    if (root >= g.node_count()) throw ContractError("walk root out of range");
    std::size_t at = root;
    seen[at] = 1;
    for (std::size_t s = 0; s < walk_length; ++s) {
      const auto nb = g.neighbors(at);
      // Self-loop excluded: pick among the other neighbours.
      const std::size_t others = nb.size() - 1;
      if (others == 0) break;
      auto pick = static_cast<std::size_t>(rng.below(others));
      for (std::size_t k = 0; k < nb.size(); ++k) {
        if (nb[k] == at) continue;
        if (pick-- == 0) {
          at = nb[k];
          break;
        }
      }
      seen[at] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

Subgraph sample_random_walk_subgraph(const graph::ModalityGraph& g, double root_fraction, std::size_t walk_length,
                                     Rng& rng) {
  const auto n = g.node_count();
  if (n == 0) throw ContractError("cannot sample from an empty graph");
  if (!(root_fraction > 0.0 && root_fraction <= 1.0)) throw ContractError("root_fraction must lie in (0,1]");
  const auto root_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(root_fraction * static_cast<double>(n) - 1e-9)), 1, n);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < root_count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(root_count);
  Subgraph sg;
  sg.nodes = random_walk_nodes(g, pool, walk_length, rng);
  sg.graph = g.induced(sg.nodes);
  return sg;
}

LabelledBlock select_split(const data::Dataset& ds, const data::ModalityFeatures& features, data::Split split) {
  if (features.rows() != ds.size()) throw ContractError("features and dataset disagree in row count");
  const auto rows = ds.indices_of(split);
  LabelledBlock out{features.subset(rows), {}};
  for (auto r : rows) {
    if (!ds.samples[r].label)
      throw ContractError("sample '" + ds.samples[r].id + "' in split " + std::string(data::to_string(split)) +
                          " has no label");
    out.labels.push_back(*ds.samples[r].label);
  }
  return out;
}

model::ModelConfig resolve_model_config(model::ModelConfig config, const data::ModalityFeatures& features,
                                        std::size_t n_classes) {
  config.input_dims = {features.tab.cols(), features.txt.cols(), features.img.cols()};
  config.n_classes = n_classes;
  config.validate();
  return config;
}

TrainResult train_model(const LabelledBlock& train, const LabelledBlock& val, std::size_t n_classes,
                        const graph::GraphConfig& graph_config, const model::ModelConfig& model_config,
                        const TrainConfig& config) {
  config.validate();
  graph_config.validate();
  if (train.features.rows() == 0) throw ConfigError("training split is empty");
  if (val.features.rows() == 0) throw ConfigError("validation split is empty");
  if (train.labels.size() != train.features.rows() || val.labels.size() != val.features.rows())
    throw ContractError("labels and features disagree in row count");
  for (auto l : train.labels)
    if (l >= n_classes) throw ContractError("training label out of range");
  for (auto l : val.labels)
    if (l >= n_classes) throw ContractError("validation label out of range");

  const auto budget = effective_time_budget(config);
  const auto start = Clock::now();

  const auto mcfg = resolve_model_config(model_config, train.features, n_classes);
  auto params = model::MuGNetParams::init(mcfg, derive_seed(config.seed, 2));
  auto state = AdamState::zeros_like(params.tensors());
  const AdamWHyper hyper{config.beta1, config.beta2, config.adam_eps, config.weight_decay};

  const auto train_graph = graph::build_multiplex_graph(train.features, graph_config);
  const auto union_graph = train_graph.union_graph();
  const auto eval_features = data::ModalityFeatures::concat(train.features, val.features);
  const auto eval_graph = graph::extend_inference_graph(train.features, eval_features, graph_config);
  std::vector<std::size_t> val_rows(val.labels.size());
  std::iota(val_rows.begin(), val_rows.end(), train.features.rows());

  Rng rng(derive_seed(config.seed, 1));
  TrainResult result;
  result.best = params;
  result.stop_reason = "epochs";
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto epoch_start = Clock::now();
    const double lr = cosine_annealing_lr(e, config.epochs, config.lr_max, config.lr_min);

    const auto sg = sample_random_walk_subgraph(union_graph, config.root_fraction, config.walk_length, rng);
    const auto sub_graph = train_graph.induced(sg.nodes);
    const auto sub_features = train.features.subset(sg.nodes);
    std::vector<std::size_t> rows(sg.nodes.size()), targets(sg.nodes.size());
    std::iota(rows.begin(), rows.end(), 0);
    for (std::size_t k = 0; k < sg.nodes.size(); ++k) targets[k] = train.labels[sg.nodes[k]];

    model::LossAndGrad lg;
    try {
      lg = model::loss_and_gradients(sub_graph, sub_features, params, rows, targets);
    } catch (const NumericError& err) {
      throw DivergenceError("training diverged at epoch " + std::to_string(e + 1) + ": " + err.what());
    }
    if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(e + 1));
    for (const auto& g : lg.grads)
      if (!g.all_finite()) throw DivergenceError("non-finite gradient at epoch " + std::to_string(e + 1));
    adamw_step(params.tensors(), lg.grads, state, lr, hyper);
    for (const Tensor* t : params.tensors())
      if (!t->all_finite()) throw DivergenceError("non-finite parameter after epoch " + std::to_string(e + 1));

    Tensor val_probs;
    try {
      const auto fwd = model::model_forward(eval_graph, eval_features, params);
      val_probs = gather_rows(fwd.probs, val_rows);
    } catch (const NumericError& err) {
      throw DivergenceError("validation diverged at epoch " + std::to_string(e + 1) + ": " + err.what());
    }
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.train_loss = lg.loss;
    rec.val_logloss = stats::log_loss(val_probs, val.labels);
    rec.val_accuracy = stats::accuracy(val_probs, val.labels);
    rec.lr = lr;
    rec.seconds = seconds_since(epoch_start);
    result.history.push_back(rec);

    if (rec.val_logloss < best_loss) {
      best_loss = rec.val_logloss;
      result.best = params;
      result.selected_epoch = rec.epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.stop_reason = "patience";
      break;
    }
    if (budget && seconds_since(start) >= *budget) {
      spdlog::warn("time budget of {} s reached after epoch {}", *budget, rec.epoch);
      result.stop_reason = "time_budget";
      break;
    }
  }
  result.train_seconds = seconds_since(start);

  const auto infer_start = Clock::now();
  (void)model::model_forward(eval_graph, eval_features, result.best);
  result.inference_seconds = seconds_since(infer_start);
  return result;
}

TrainResult train_model(const data::Dataset& ds, const data::ModalityFeatures& features,
                        const graph::GraphConfig& graph_config, const model::ModelConfig& model_config,
                        const TrainConfig& config) {
  const auto train = select_split(ds, features, data::Split::train);
  const auto val = select_split(ds, features, data::Split::val);
  return train_model(train, val, ds.label_vocab.size(), graph_config, model_config, config);
}

Prediction predict_unseen(const data::ModalityFeatures& train, const data::ModalityFeatures& unseen,
                          const graph::GraphConfig& graph_config, const model::MuGNetParams& params) {
  const auto& dims = params.config.input_dims;
  if (train.tab.cols() != dims[0] || train.txt.cols() != dims[1] || train.img.cols() != dims[2] ||
      unseen.tab.cols() != dims[0] || unseen.txt.cols() != dims[1] || unseen.img.cols() != dims[2])
    throw ContractError("feature widths do not match the model's input dimensions");
  if (unseen.rows() == 0) return {Tensor(0, params.config.n_classes), Tensor(0, 3)};
  const auto all = data::ModalityFeatures::concat(train, unseen);
  const auto g = graph::extend_inference_graph(train, all, graph_config);
  const auto fwd = model::model_forward(g, all, params);
  std::vector<std::size_t> rows(unseen.rows());
  std::iota(rows.begin(), rows.end(), train.rows());
  return {gather_rows(fwd.probs, rows), gather_rows(fwd.trace.alpha, rows)};
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ContractError("cannot format number");
  return {buf, ptr};
}

void write_history(std::ostream& out, std::span<const EpochRecord> history, bool with_seconds) {
  out << "epoch,train_loss,val_logloss,val_acc,lr,seconds\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.val_logloss) << ','
        << format_real(r.val_accuracy) << ',' << format_real(r.lr) << ',';
    if (with_seconds) out << format_real(r.seconds);
    out << '\n';
  }
}

void write_history(const std::filesystem::path& path, std::span<const EpochRecord> history, bool with_seconds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_history(out, history, with_seconds);
}

}  // namespace mug::train
