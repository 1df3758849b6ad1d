#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mug/autodiff.hpp"
#include "mug/checkpoint.hpp"
#include "mug/features.hpp"
#include "mug/graph.hpp"
#include "mug/keyvalue.hpp"
#include "mug/layers.hpp"

namespace mug::model {

struct ModelConfig {
  std::size_t gat_layers = 2;
  std::size_t heads = 4;
  std::size_t hidden_dim = 64;      ///< shared embedding width of every encoder
  std::size_t attention_dim = 32;   ///< fusion projection width
  std::size_t classifier_hidden = 0;  ///< 0 means hidden_dim / 2
  std::size_t n_classes = 2;
  std::array<std::size_t, 3> input_dims{0, 0, 0};  ///< tab, txt, img widths
  double slope = nn::kLeakySlope;

  std::size_t classifier_width() const { return classifier_hidden ? classifier_hidden : std::max<std::size_t>(1, hidden_dim / 2); }
  /// Throws ConfigError on zero sizes or hidden_dim not divisible by heads.
  void validate() const;

  /// Keys: gat_layers, heads, hidden_dim, attention_dim, classifier_hidden,
  /// n_classes, input_dim.tab/txt/img, slope. Missing keys keep defaults.
  static ModelConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "model.");
  void to_config(KeyValueConfig& kv, const std::string& prefix = "model.") const;
  bool operator==(const ModelConfig&) const = default;
};

struct MuGNetParams {
  ModelConfig config;
  std::array<std::vector<nn::GATLayerParams>, 3> encoders;
  std::array<Tensor, 3> fuse_proj;  ///< hidden_dim × attention_dim per modality
  Tensor fuse_vec;                  ///< attention_dim × 1, shared by modalities
  nn::MLPParams classifier;

  /// Glorot-uniform weights, zero biases, deterministic in `seed`.
  static MuGNetParams init(const ModelConfig& config, std::uint64_t seed);

  /// Every trainable tensor in a fixed order shared by names(), checkpoints
  /// and the optimiser.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;

  std::vector<nn::NamedTensor> to_named() const;
  /// Throws ContractError unless names and shapes match `config` exactly.
  static MuGNetParams from_named(const ModelConfig& config, const std::vector<nn::NamedTensor>& named);

  bool operator==(const MuGNetParams& other) const;
};

/// Per-sample fusion weights (N×3, columns tab, txt, img) and fused
/// embeddings (N×hidden_dim).
struct FusionTrace {
  Tensor alpha;
  Tensor fused;
};

struct ForwardResult {
  Tensor probs;
  FusionTrace trace;
  std::optional<double> loss;
};

/// Tape-level outputs of one forward pass.
struct TapeForward {
  std::array<nn::Var, 3> embeddings;
  nn::Var alpha;
  nn::Var fused;
  nn::Var probs;
};

/// Records the whole model on `tape`. `param_vars` follows tensors() order.
TapeForward forward_on_tape(nn::Tape& tape, const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                            const MuGNetParams& params, std::span<const nn::Var> param_vars);

std::array<Tensor, 3> encode_modalities(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                                        const MuGNetParams& params);
FusionTrace attention_fuse(const Tensor& h_tab, const Tensor& h_txt, const Tensor& h_img,
                           const MuGNetParams& params);
Tensor classify_head(const Tensor& fused, const MuGNetParams& params);
/// Loss (when targets are given) is the mean cross-entropy over all rows.
ForwardResult model_forward(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                            const MuGNetParams& params,
                            std::optional<std::span<const std::size_t>> targets = std::nullopt);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;  ///< tensors() order
};

/// Mean cross-entropy over `rows` (node indices into the graph) against
/// `targets`, with exact gradients for every parameter.
LossAndGrad loss_and_gradients(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                               const MuGNetParams& params, std::span<const std::size_t> rows,
                               std::span<const std::size_t> targets);
/// Loss value only; same definition as loss_and_gradients.
double loss_value(const graph::MultiplexGraph& g, const data::ModalityFeatures& features,
                  const MuGNetParams& params, std::span<const std::size_t> rows,
                  std::span<const std::size_t> targets);

/// Checkpoint plus `<path>.config` key-value sidecar.
void save_model(const std::filesystem::path& path, const MuGNetParams& params);
MuGNetParams load_model(const std::filesystem::path& path);

}  // namespace mug::model
