#include "dghif/trainpipe/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"

namespace dghif::train {

using tc::Tensor;

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (n == 0) throw DataError("dataset has no users");
  if (post_offsets.size() != n + 1 || post_offsets.front() != 0 || post_offsets.back() != posts.size()) {
    throw DataError("dataset post offsets do not cover the posts");
  }
  for (std::size_t u = 0; u < n; ++u) {
    if (post_offsets[u + 1] <= post_offsets[u]) throw DataError(fmt::format("user {} has no posts", u));
  }
  if (metaphor.size() != n || has_graph.size() != n) throw DataError("dataset flag vectors differ in length");
  if (!graph || graph->nodes() != n) throw DataError("dataset graph does not have one node per user");
  if (structural.defined() && structural.dim(0) != n) throw DataError("structural features need one row per user");
}

Tensor structural_features(const graph::HeteroGraph& g) {
  const std::size_t n = g.nodes(), r_count = g.relation_count();
  const std::size_t width = 2 * r_count + 1;
  std::vector<double> values(n * width, 0.0);
  for (std::size_t r = 0; r < r_count; ++r) {
    const auto& in = g.neighbors(r, graph::Direction::In);
    const auto& out = g.neighbors(r, graph::Direction::Out);
    for (std::size_t i = 0; i < n; ++i) {
      values[i * width + 2 * r] = std::log1p(static_cast<double>(in.row_size(i)));
      values[i * width + 2 * r + 1] = std::log1p(static_cast<double>(out.row_size(i)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) values[i * width + width - 1] = 1.0;
  return Tensor::from_values({n, width}, std::move(values));
}

Model Model::init(const ModelConfig& config, const Dataset& data, LambdaPolicy lambda, std::mt19937_64& rng) {
  data.validate();
  Model m;
  m.config = config;
  m.config.encoder.vocab_size = data.vocab_size;
  m.config.encoder.validate();

  m.text = text::EncoderParams::init(m.config.encoder, rng);
  if (config.semantic_guide_off) {
    for (double& x : m.text.guide.mutable_values()) x = 0.0;
    m.text.guide.set_requires_grad(false);
  }

  graph::GnnConfig gnn;
  gnn.in_dim = config.uses_text() ? m.config.encoder.hidden : data.structural.dim(1);
  gnn.hidden = config.graph_hidden;
  gnn.layers = config.gnn_layers;
  gnn.norm = config.norm;
  gnn.relation_weights = config.relation_weights;
  m.gnn = graph::RgcnParams::init(gnn, data.graph->relation_count(), rng);

  fusion::FusionConfig fc;
  fc.text_dim = m.config.encoder.hidden;
  fc.graph_dim = config.gnn_layers > 0 ? config.graph_hidden : gnn.in_dim;
  fc.dim = config.fusion_dim;
  fc.gate_dropout = config.gate_dropout;
  fc.mode = config.fusion_mode;
  m.fusion = fusion::FusionParams::init(fc, rng);

  m.head = RiskHead::init(fc.output_dim(), config.head_hidden, rng);
  m.lambda = std::move(lambda);
  return m;
}

tc::ParamList Model::parameters() const {
  tc::ParamList out;
  auto append = [&out](tc::ParamList part) { out.insert(out.end(), part.begin(), part.end()); };
  if (config.uses_text()) append(text.parameters(!config.semantic_guide_off));
  if (config.uses_graph()) {
    append(gnn.parameters());
    append(lambda.parameters());
  }
  append(fusion.parameters());
  append(head.parameters());
  return out;
}

Tensor node_features(const Model& model, const Dataset& data, bool train, std::mt19937_64& rng) {
  if (!model.config.uses_graph()) return {};
  if (!model.config.uses_text()) return data.structural;
  if (tc::active_tape() != nullptr) {
    Tensor posts = text::encode_posts(data.posts, model.text, train, rng);
    return text::user_embeddings(posts, data.post_offsets);
  }
  // Without a tape the posts are encoded in chunks to bound memory.
  const std::size_t n = data.users(), width = model.config.encoder.hidden;
  constexpr std::size_t kChunkUsers = 256;
  std::vector<double> values(n * width);
  for (std::size_t begin = 0; begin < n; begin += kChunkUsers) {
    std::size_t end = std::min(n, begin + kChunkUsers);
    std::span<const text::TokenSequence> posts(data.posts.data() + data.post_offsets[begin],
                                               data.post_offsets[end] - data.post_offsets[begin]);
    std::vector<std::size_t> offsets;
    for (std::size_t u = begin; u <= end; ++u) offsets.push_back(data.post_offsets[u] - data.post_offsets[begin]);
    Tensor users = text::user_embeddings(text::encode_posts(posts, model.text, train, rng), offsets);
    std::copy(users.values().begin(), users.values().end(), values.begin() + static_cast<std::ptrdiff_t>(begin * width));
  }
  return Tensor::from_values({n, width}, std::move(values));
}

Tensor graph_embeddings(const Model& model, const Dataset& data, const Tensor& features) {
  if (!model.config.uses_graph()) return {};
  return graph::gnn_forward(*data.graph, features, model.gnn);
}

ForwardOutput forward_with_embeddings(const Model& model, const Dataset& data, std::span<const std::size_t> users,
                                      const Tensor& embeddings, bool train, std::mt19937_64& rng) {
  for (std::size_t u : users) {
    if (u >= data.users()) throw DataError(fmt::format("user {} out of range ({} users)", u, data.users()));
  }
  ForwardOutput out;
  Tensor h;
  if (model.config.uses_text()) {
    std::vector<text::TokenSequence> posts;
    std::vector<std::size_t> offsets{0};
    for (std::size_t u : users) {
      for (std::size_t p = data.post_offsets[u]; p < data.post_offsets[u + 1]; ++p) posts.push_back(data.posts[p]);
      offsets.push_back(posts.size());
    }
    h = text::user_embeddings(text::encode_posts(posts, model.text, train, rng), offsets);
  }
  Tensor v;
  std::vector<bool> present(users.size(), false);
  if (model.config.uses_graph()) {
    out.graph_embeddings = embeddings;
    v = tc::gather_rows(embeddings, users);
    for (std::size_t i = 0; i < users.size(); ++i) present[i] = data.has_graph[users[i]];
  }
  out.fused = fusion::fuse(h, v, model.fusion, train, rng, v.defined() ? present : std::vector<bool>{});
  out.logits = risk_logits(out.fused.z, model.head);
  return out;
}

ForwardOutput forward(const Model& model, const Dataset& data, std::span<const std::size_t> users,
                      const Tensor& features, bool train, std::mt19937_64& rng) {
  Tensor embeddings;
  if (model.config.uses_graph()) {
    const double rate = model.config.encoder.dropout;
    Tensor input = train && rate > 0.0 ? tc::dropout(features, rate, true, rng) : features;
    embeddings = graph::gnn_forward(*data.graph, input, model.gnn);
  }
  return forward_with_embeddings(model, data, users, embeddings, train, rng);
}

Scores score_users(const Model& model, const Dataset& data, std::span<const std::size_t> users,
                   const Tensor& features, std::size_t batch_size) {
  tc::NoGradScope no_grad;
  std::mt19937_64 unused(0);
  Tensor embeddings = graph_embeddings(model, data, features);
  Scores s;
  for (std::size_t begin = 0; begin < users.size(); begin += batch_size) {
    auto batch = users.subspan(begin, std::min(batch_size, users.size() - begin));
    ForwardOutput out = forward_with_embeddings(model, data, batch, embeddings, false, unused);
    std::vector<double> masses =
        out.fused.g.defined() ? fusion::gate_masses(out.fused.g) : std::vector<double>(batch.size(), std::nan(""));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double logit = out.logits.at(i);
      s.risk.push_back(1.0 / (1.0 + std::exp(-logit)));
      bool bypassed = !out.fused.bypassed.empty() && out.fused.bypassed[i];
      s.bypassed.push_back(bypassed);
      s.gate_mass.push_back(bypassed ? std::nan("") : masses[i]);
    }
  }
  return s;
}

std::vector<double> labels_as_double(const Dataset& data, std::span<const std::size_t> users) {
  std::vector<double> out;
  out.reserve(users.size());
  for (std::size_t u : users) out.push_back(static_cast<double>(data.labels.at(u)));
  return out;
}

}  // namespace dghif::train
