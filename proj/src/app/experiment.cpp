#include "dghif/app/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <random>

#include "dghif/common/errors.hpp"
#include "dghif/common/seed.hpp"
#include "dghif/textenc/vocab.hpp"

namespace dghif::app {

namespace {
constexpr std::uint64_t kLatencyStream = 30;
}

train::Dataset make_dataset(const synth::SynthCorpus& corpus, std::size_t max_len) {
  text::Vocab vocab = text::Vocab::from_tokens(synth::corpus_vocabulary(corpus.config));
  train::Dataset data;
  data.vocab_size = vocab.size();
  const std::size_t n = corpus.users.size();
  data.labels.reserve(n);
  data.metaphor.assign(n, false);
  for (const auto& u : corpus.users) data.labels.push_back(u.label);

  std::size_t next = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (; next < corpus.posts.size() && corpus.posts[next].user == u; ++next) {
      const auto& post = corpus.posts[next];
      std::vector<std::size_t> ids;
      ids.reserve(post.tokens.size());
      for (const auto& t : post.tokens) ids.push_back(vocab.find(t).value_or(text::kUnk));
      text::TokenSequence seq = text::make_sequence(ids, max_len);
      seq.metaphor = post.metaphor;
      seq.post_id = next;
      data.metaphor[u] = data.metaphor[u] || post.metaphor;
      data.posts.push_back(std::move(seq));
    }
    data.post_offsets.push_back(data.posts.size());
  }
  if (next != corpus.posts.size()) throw DataError("corpus posts are not grouped by user in id order");

  auto g = std::make_shared<graph::HeteroGraph>(synth::build_corpus_graph(corpus));
  data.has_graph.assign(n, false);
  for (std::size_t r = 0; r < g->relation_count(); ++r) {
    for (auto dir : {graph::Direction::In, graph::Direction::Out}) {
      const auto& adj = g->neighbors(r, dir);
      for (std::size_t i = 0; i < n; ++i) {
        if (adj.row_size(i) > 0) data.has_graph[i] = true;
      }
    }
  }
  data.structural = train::structural_features(*g);
  data.graph = std::move(g);
  data.validate();
  return data;
}

train::Model init_model(const ExperimentConfig& config, const train::Dataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(train::init_seed(seed));
  auto lambda = train::LambdaPolicy::make(config.train.lambda_mode, config.train.lambda0, 1);
  return train::Model::init(config.model, data, std::move(lambda), rng);
}

double measure_latency(const train::Model& model, const train::Dataset& data, const tc::Tensor& features,
                       std::size_t samples, std::uint64_t seed) {
  if (samples == 0) return 0.0;
  tc::NoGradScope no_grad;
  tc::Tensor embeddings = train::graph_embeddings(model, data, features);
  std::mt19937_64 rng(derive_seed(seed, kLatencyStream));
  std::uniform_int_distribution<std::size_t> pick(0, data.users() - 1);
  std::vector<double> ms;
  ms.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    std::size_t user = pick(rng);
    auto start = std::chrono::steady_clock::now();
    auto out = train::forward_with_embeddings(model, data, std::span<const std::size_t>(&user, 1), embeddings,
                                              false, rng);
    (void)out.logits.at(0);
    auto stop = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  auto mid = ms.begin() + static_cast<std::ptrdiff_t>(ms.size() / 2);
  std::nth_element(ms.begin(), mid, ms.end());
  return *mid;
}

VariantRun run_variant(const ExperimentConfig& config, std::uint64_t seed, bool with_efficiency) {
  synth::SynthConfig sc = config.synth;
  sc.seed = seed;
  synth::SynthCorpus corpus = synth::generate(sc);
  train::Dataset data = make_dataset(corpus, config.model.encoder.max_len);
  train::Model model = init_model(config, data, seed);
  VariantRun run;
  run.result = train::run_stage_plan(model, data, config.train, seed);
  if (config.run.latency_samples > 0) {
    std::mt19937_64 unused(0);
    tc::Tensor features;
    {
      tc::NoGradScope no_grad;
      features = train::node_features(model, data, false, unused);
    }
    run.latency_ms = measure_latency(model, data, features, config.run.latency_samples, seed);
  }
  if (with_efficiency) run.efficiency = measure_efficiency(model, inject_events(corpus, config.benchmark, seed), config.benchmark);
  return run;
}

std::unique_ptr<TrainSession> open_session(const ExperimentConfig& config, synth::SynthCorpus corpus,
                                           std::uint64_t seed) {
  auto s = std::make_unique<TrainSession>();
  s->config = config;
  s->seed = seed;
  s->corpus = std::move(corpus);
  s->data = make_dataset(s->corpus, config.model.encoder.max_len);
  s->model = init_model(config, s->data, seed);
  s->trainer = std::make_unique<train::Trainer>(s->model, s->data, config.train,
                                                train::make_plan(config.train, s->model.config), seed);
  return s;
}

std::unique_ptr<TrainSession> resume_session(const ExperimentConfig& config, synth::SynthCorpus corpus,
                                             const Checkpoint& ckpt, bool force) {
  check_config(ckpt, config, force);
  auto s = open_session(config, std::move(corpus), ckpt.seed);
  restore_parameters(ckpt, s->model.parameters());
  s->trainer->restore(ckpt.trainer, ckpt.moments);
  return s;
}

ScoringModel load_for_scoring(const Checkpoint& ckpt, const synth::SynthCorpus& corpus) {
  ScoringModel m;
  m.config = ckpt.config();
  m.data = make_dataset(corpus, m.config.model.encoder.max_len);
  m.model = init_model(m.config, m.data, ckpt.seed);
  restore_parameters(ckpt, m.model.parameters());
  tc::NoGradScope no_grad;
  std::mt19937_64 unused(0);
  m.features = train::node_features(m.model, m.data, false, unused);
  return m;
}

}  // namespace dghif::app
