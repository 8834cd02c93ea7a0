#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dghif/relgraph/graph.hpp"
#include "dghif/tensorcore/params.hpp"

namespace dghif::graph {

enum class NormMode { Adaptive, FixedSqrt };
enum class Activation { Tanh, Identity, Relu };

inline constexpr double kNormFloor = 1e-3;

struct GnnConfig {
  std::size_t in_dim = 64;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  NormMode norm = NormMode::Adaptive;
  bool relation_weights = true;  // false pins every omega_r at 1 and freezes it
  Activation activation = Activation::Tanh;
  Direction direction = Direction::In;
};

struct RgcnLayer {
  std::vector<tc::Tensor> w_rel;  // one [d_in, d_out] per relation
  tc::Tensor w_self;              // [d_in, d_out]
  tc::Tensor residual_proj;       // [d_in, d_out], undefined when d_in == d_out
};

struct RgcnParams {
  GnnConfig config;
  std::vector<RgcnLayer> layers;
  tc::Tensor omega;    // [R] propagation weight per relation
  tc::Tensor eta_raw;  // [R] eta_r = softplus(eta_raw_r)

  /// eta_r is initialised so that softplus(eta_raw_r) ~ Uniform(0, 1); omega_r = 1.
  static RgcnParams init(const GnnConfig& config, std::size_t relations, std::mt19937_64& rng);

  tc::Tensor eta() const;
  /// Group "graph"; omega is left out when relation weights are off.
  tc::ParamList parameters() const;
};

/// max(eta * ln(neighbor_count + 1), kNormFloor).
double adaptive_norm_coeff(double eta, std::size_t neighbor_count);

/// One relational convolution:
///   out_i = act(sum_r omega_r sum_{j in N_i^r} W_r v_j / c_{i,r} + W_0 v_i) + res(v_i)
/// Relations with an empty neighbourhood contribute zero.
tc::Tensor rgcn_layer(const HeteroGraph& graph, const tc::Tensor& features, const RgcnParams& params,
                      std::size_t layer);

/// |omega_r| / c_{i,r} for every relation r and node i (zero where node i has
/// no r-neighbours); the per-edge propagation strength of the convolution.
std::vector<std::vector<double>> message_scales(const HeteroGraph& graph, const RgcnParams& params);

/// Applies every layer in turn; zero layers is the identity.
tc::Tensor gnn_forward(const HeteroGraph& graph, const tc::Tensor& features, const RgcnParams& params);

/// Node pairs with binary link labels.
struct PairBatch {
  std::vector<std::size_t> first, second;
  std::vector<double> labels;
};

/// `positives` linked pairs drawn uniformly with replacement plus the same
/// number of unlinked pairs drawn uniformly. DataError on an edgeless graph.
PairBatch sample_edge_pairs(const HeteroGraph& graph, std::size_t positives, std::mt19937_64& rng);

/// BCE of sigmoid(v_i . v_j) against the link labels.
tc::Tensor edge_prediction_loss(const tc::Tensor& embeddings, const PairBatch& batch);

tc::Tensor edge_prediction_step(const HeteroGraph& graph, const tc::Tensor& features, const RgcnParams& params,
                                const PairBatch& batch);

}  // namespace dghif::graph
