#include "dghif/relgraph/rgcn.hpp"

#include <cmath>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"

namespace dghif::graph {

using tc::Tensor;

RgcnParams RgcnParams::init(const GnnConfig& config, std::size_t relations, std::mt19937_64& rng) {
  if (relations == 0) throw ConfigError("gnn: at least one relation required");
  RgcnParams p;
  p.config = config;
  std::size_t d_in = config.in_dim;
  for (std::size_t l = 0; l < config.layers; ++l) {
    RgcnLayer layer;
    for (std::size_t r = 0; r < relations; ++r) layer.w_rel.push_back(tc::xavier_uniform(d_in, config.hidden, rng));
    layer.w_self = tc::xavier_uniform(d_in, config.hidden, rng);
    if (d_in != config.hidden) layer.residual_proj = tc::xavier_uniform(d_in, config.hidden, rng);
    p.layers.push_back(std::move(layer));
    d_in = config.hidden;
  }
  p.omega = Tensor::full({relations}, 1.0, config.relation_weights);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> raw(relations);
  for (double& x : raw) {
    double u = unit(rng);
    while (u <= 0.0) u = unit(rng);
    x = std::log(std::expm1(u));  // inverse softplus
  }
  p.eta_raw = Tensor::from_values({relations}, std::move(raw), config.norm == NormMode::Adaptive);
  return p;
}

Tensor RgcnParams::eta() const { return tc::softplus(eta_raw); }

tc::ParamList RgcnParams::parameters() const {
  tc::ParamList out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "gnn.layer" + std::to_string(l) + ".";
    for (std::size_t r = 0; r < layers[l].w_rel.size(); ++r)
      out.push_back({pre + "w_rel" + std::to_string(r), "graph", layers[l].w_rel[r]});
    out.push_back({pre + "w_self", "graph", layers[l].w_self});
    if (layers[l].residual_proj.defined()) out.push_back({pre + "residual_proj", "graph", layers[l].residual_proj});
  }
  if (config.relation_weights) out.push_back({"gnn.omega", "graph", omega});
  if (config.norm == NormMode::Adaptive) out.push_back({"gnn.eta_raw", "graph", eta_raw});
  return out;
}

double adaptive_norm_coeff(double eta, std::size_t neighbor_count) {
  if (!(eta > 0.0)) throw DomainError("adaptive normalization needs eta > 0");
  return std::max(eta * std::log(static_cast<double>(neighbor_count) + 1.0), kNormFloor);
}

namespace {

Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::Tanh:
      return tc::tanh(x);
    case Activation::Relu:
      return tc::clamp_min(x, 0.0);
    case Activation::Identity:
      break;
  }
  return x;
}

/// Per-node message scale omega_r / c_{i,r} for relation r.
Tensor message_scale(const tc::Csr& nbrs, std::size_t r, const RgcnParams& params, const Tensor& eta) {
  const std::size_t n = nbrs.rows();
  const std::vector<std::size_t> pick{r};
  Tensor omega_r = tc::gather_rows(params.omega, pick);
  if (params.config.norm == NormMode::FixedSqrt) {
    std::vector<double> inv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = nbrs.row_size(i);
      if (k > 0) inv[i] = 1.0 / std::sqrt(static_cast<double>(k));
    }
    return tc::scale_by(Tensor::from_values({n}, std::move(inv)), omega_r);
  }
  std::vector<double> logdeg(n);
  for (std::size_t i = 0; i < n; ++i) logdeg[i] = std::log(static_cast<double>(nbrs.row_size(i)) + 1.0);
  Tensor c = tc::clamp_min(tc::scale_by(Tensor::from_values({n}, std::move(logdeg)), tc::gather_rows(eta, pick)),
                           kNormFloor);
  return tc::scale_by(tc::div(Tensor::full({n}, 1.0), c), omega_r);
}

}  // namespace

Tensor rgcn_layer(const HeteroGraph& graph, const Tensor& features, const RgcnParams& params, std::size_t layer) {
  const auto& L = params.layers.at(layer);
  if (features.rank() != 2 || features.dim(0) != graph.nodes() || features.dim(1) != L.w_self.dim(0)) {
    throw ShapeError("rgcn_layer: features " + tc::to_string(features.shape()) + " for " +
                     std::to_string(graph.nodes()) + " nodes and layer input width " +
                     std::to_string(L.w_self.dim(0)));
  }
  if (L.w_rel.size() != graph.relation_count()) throw ShapeError("rgcn_layer: relation count mismatch");
  const Tensor eta = params.config.norm == NormMode::Adaptive ? params.eta() : Tensor();
  Tensor pre = tc::matmul(features, L.w_self);
  for (std::size_t r = 0; r < graph.relation_count(); ++r) {
    if (graph.edges(r).empty()) continue;
    auto adj = graph.aggregation(r, params.config.direction);
    Tensor agg = tc::neighbor_sum(features, adj);
    Tensor scaled = tc::scale_rows(agg, message_scale(adj->gather, r, params, eta));
    pre = tc::add(pre, tc::matmul(scaled, L.w_rel[r]));
  }
  Tensor residual = L.residual_proj.defined() ? tc::matmul(features, L.residual_proj) : features;
  return tc::add(activate(pre, params.config.activation), residual);
}

std::vector<std::vector<double>> message_scales(const HeteroGraph& graph, const RgcnParams& params) {
  tc::NoGradScope no_grad;
  const Tensor eta = params.config.norm == NormMode::Adaptive ? params.eta() : Tensor();
  std::vector<std::vector<double>> out(graph.relation_count(), std::vector<double>(graph.nodes(), 0.0));
  for (std::size_t r = 0; r < graph.relation_count(); ++r) {
    auto adj = graph.aggregation(r, params.config.direction);
    Tensor s = message_scale(adj->gather, r, params, eta);
    for (std::size_t i = 0; i < graph.nodes(); ++i) {
      if (adj->gather.row_size(i) > 0) out[r][i] = std::abs(s.values()[i]);
    }
  }
  return out;
}

Tensor gnn_forward(const HeteroGraph& graph, const Tensor& features, const RgcnParams& params) {
  Tensor x = features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) x = rgcn_layer(graph, x, params, l);
  return x;
}

PairBatch sample_edge_pairs(const HeteroGraph& graph, std::size_t positives, std::mt19937_64& rng) {
  const auto& pairs = graph.linked_pairs();
  if (pairs.empty()) throw DataError("edge prediction: graph has no edges");
  if (graph.nodes() < 2) throw DataError("edge prediction: need at least two nodes");
  PairBatch batch;
  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_node(0, graph.nodes() - 1);
  for (std::size_t k = 0; k < positives; ++k) {
    const auto& e = pairs[pick_pair(rng)];
    batch.first.push_back(e.src);
    batch.second.push_back(e.dst);
    batch.labels.push_back(1.0);
  }
  const std::size_t max_pairs = graph.nodes() * (graph.nodes() - 1) / 2;
  const bool can_sample_negative = pairs.size() < max_pairs;
  for (std::size_t k = 0; k < positives && can_sample_negative; ++k) {
    std::size_t i = 0, j = 0;
    do {
      i = pick_node(rng);
      j = pick_node(rng);
    } while (i == j || graph.linked(i, j));
    batch.first.push_back(i);
    batch.second.push_back(j);
    batch.labels.push_back(0.0);
  }
  return batch;
}

Tensor edge_prediction_loss(const Tensor& embeddings, const PairBatch& batch) {
  Tensor a = tc::gather_rows(embeddings, batch.first);
  Tensor b = tc::gather_rows(embeddings, batch.second);
  return tc::bce_with_logits(tc::sum_last(tc::mul(a, b)), batch.labels);
}

Tensor edge_prediction_step(const HeteroGraph& graph, const Tensor& features, const RgcnParams& params,
                            const PairBatch& batch) {
  return edge_prediction_loss(gnn_forward(graph, features, params), batch);
}

}  // namespace dghif::graph
