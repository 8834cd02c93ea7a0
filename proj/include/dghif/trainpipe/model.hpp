#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "dghif/fusion/fusion.hpp"
#include "dghif/relgraph/rgcn.hpp"
#include "dghif/textenc/encoder.hpp"
#include "dghif/trainpipe/losses.hpp"

namespace dghif::train {

struct ModelConfig {
  text::EncoderConfig encoder;  // vocab_size is taken from the dataset
  std::size_t graph_hidden = 64;
  std::size_t gnn_layers = 2;
  graph::NormMode norm = graph::NormMode::Adaptive;
  bool relation_weights = true;
  std::size_t fusion_dim = 64;
  fusion::FusionMode fusion_mode = fusion::FusionMode::Gated;
  double gate_dropout = 0.2;
  std::size_t head_hidden = 64;
  bool semantic_guide_off = false;  // v = 0: attention pooling becomes a masked mean

  bool uses_text() const noexcept { return fusion_mode != fusion::FusionMode::GraphOnly; }
  bool uses_graph() const noexcept { return fusion_mode != fusion::FusionMode::TextOnly; }
};

/// Everything a run needs about its users, already tokenized.
struct Dataset {
  std::vector<text::TokenSequence> posts;
  std::vector<std::size_t> post_offsets{0};  // posts of user u: [offsets[u], offsets[u+1])
  std::vector<int> labels;
  std::vector<bool> metaphor;   // user has at least one metaphor-flagged post
  std::vector<bool> has_graph;  // user has at least one edge
  std::shared_ptr<const graph::HeteroGraph> graph;
  tc::Tensor structural;  // [N, k] degree features for the graph-only model
  std::size_t vocab_size = 0;

  std::size_t users() const noexcept { return labels.size(); }
  /// Throws DataError when the parts disagree in size.
  void validate() const;
};

/// [N, 2R + 1] features: log(1 + in-degree) and log(1 + out-degree) per
/// relation, plus a constant 1.
tc::Tensor structural_features(const graph::HeteroGraph& graph);

struct Model {
  ModelConfig config;
  text::EncoderParams text;
  graph::RgcnParams gnn;
  fusion::FusionParams fusion;
  RiskHead head;
  LambdaPolicy lambda;

  static Model init(const ModelConfig& config, const Dataset& data, LambdaPolicy lambda, std::mt19937_64& rng);

  /// All learnable tensors of the parts the configured mode uses, in a fixed
  /// order. Groups: text, pool, graph, fusion, head, lambda.
  tc::ParamList parameters() const;
};

/// Graph input features for every node: mean pooled post representations, or
/// the structural features for the graph-only model. Undefined for the
/// text-only model.
tc::Tensor node_features(const Model& model, const Dataset& data, bool train, std::mt19937_64& rng);

struct ForwardOutput {
  tc::Tensor logits;  // [B]
  fusion::FusionOutput fused;
  tc::Tensor graph_embeddings;  // [N, graph_hidden], undefined without a graph view
};

/// Logits for `users`. `features` holds the GNN input for every node
/// (ignored by the text-only model). With `train`, dropout draws from `rng`.
ForwardOutput forward(const Model& model, const Dataset& data, std::span<const std::size_t> users,
                      const tc::Tensor& features, bool train, std::mt19937_64& rng);

/// Same as `forward` but with precomputed graph embeddings [N, graph_hidden].
ForwardOutput forward_with_embeddings(const Model& model, const Dataset& data, std::span<const std::size_t> users,
                                      const tc::Tensor& graph_embeddings, bool train, std::mt19937_64& rng);

tc::Tensor graph_embeddings(const Model& model, const Dataset& data, const tc::Tensor& features);

struct Scores {
  std::vector<double> risk;       // sigmoid of the logit
  std::vector<double> gate_mass;  // mean gate per user; NaN when bypassed or not gated
  std::vector<bool> bypassed;
};

/// Eval-mode scores for `users`, without recording gradients.
Scores score_users(const Model& model, const Dataset& data, std::span<const std::size_t> users,
                   const tc::Tensor& features, std::size_t batch_size = 256);

std::vector<double> labels_as_double(const Dataset& data, std::span<const std::size_t> users);

}  // namespace dghif::train
