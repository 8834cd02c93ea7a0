#include "dghif/trainpipe/grad_probe.hpp"

#include <memory>
#include <random>

#include "dghif/relgraph/rgcn.hpp"
#include "dghif/tensorcore/precision.hpp"
#include "dghif/trainpipe/losses.hpp"

namespace dghif::train {

Dataset four_user_dataset() {
  Dataset data;
  data.vocab_size = text::kNumSpecial + 6;
  const std::vector<std::vector<std::size_t>> posts{{4, 5, 6}, {7, 8}, {9, 4, 5, 6}, {8}, {6, 7}};
  const std::vector<std::size_t> owner{0, 0, 1, 2, 3};
  for (std::size_t p = 0; p < posts.size(); ++p) {
    data.posts.push_back(text::make_sequence(posts[p], 6));
    if (p + 1 == posts.size() || owner[p + 1] != owner[p]) data.post_offsets.push_back(p + 1);
  }
  data.labels = {1, 0, 1, 0};
  data.metaphor = {false, true, false, false};
  data.has_graph = {true, true, true, false};
  std::vector<graph::Interaction> edges{{0, 0, 1}, {1, 2, 2}, {2, 1, 0}, {0, 3, 2}, {1, 0, 0}};
  data.graph = std::make_shared<graph::HeteroGraph>(graph::build_graph(4, edges));
  data.structural = structural_features(*data.graph);
  data.validate();
  return data;
}

ModelConfig four_user_model_config() {
  ModelConfig mc;
  mc.encoder.hidden = 4;
  mc.encoder.heads = 2;
  mc.encoder.ffn = 6;
  mc.encoder.layers = 1;
  mc.encoder.max_len = 6;
  mc.encoder.dropout = 0.0;
  mc.graph_hidden = 4;
  mc.fusion_dim = 4;
  mc.head_hidden = 3;
  return mc;
}

tc::GradCheckReport joint_loss_grad_check(LambdaMode lambda_mode, std::uint64_t seed,
                                          const tc::GradCheckOptions& options) {
  tc::PrecisionScope f64(tc::Precision::f64);
  const Dataset data = four_user_dataset();
  std::mt19937_64 rng(seed);
  Model model = Model::init(four_user_model_config(), data, LambdaPolicy::make(lambda_mode, 0.5), rng);

  const graph::PairBatch pairs{{0, 1, 2, 3}, {1, 2, 0, 1}, {1.0, 1.0, 1.0, 0.0}};
  const std::vector<std::size_t> users{0, 1, 2, 3};
  auto loss_fn = [&]() {
    std::mt19937_64 unused(0);
    tc::Tensor features = node_features(model, data, false, unused);
    ForwardOutput out = forward(model, data, users, features, false, unused);
    tc::Tensor l_risk = risk_loss(out.logits, labels_as_double(data, users));
    tc::Tensor l_rel = graph::edge_prediction_loss(out.graph_embeddings, pairs);
    return joint_loss(l_risk, l_rel, model.lambda, 0);
  };
  return tc::grad_check(loss_fn, model.parameters(), options);
}

}  // namespace dghif::train
