#include "dghif/app/efficiency.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "dghif/app/experiment.hpp"
#include "dghif/common/errors.hpp"
#include "dghif/common/seed.hpp"
#include "dghif/synthbench/metrics.hpp"

namespace dghif::app {

namespace {

constexpr std::uint64_t kCascadeStream = 40;
constexpr std::uint64_t kAdoptStream = 50;
constexpr synth::EventType kEvents[] = {synth::EventType::ViolentIncitement, synth::EventType::FalseNews,
                                        synth::EventType::FinancialFraud};

std::size_t pick(std::size_t n, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t k, std::mt19937_64& rng) {
  if (pool.empty()) throw DataError("no candidate seed nodes for the event");
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(k, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::string> event_post(synth::EventType type, const synth::SynthConfig& c, std::mt19937_64& rng) {
  std::size_t len = c.min_post_len + pick(c.max_post_len - c.min_post_len + 1, rng);
  std::vector<std::string> tokens(len);
  for (auto& t : tokens) t = synth::filler_token(pick(c.filler_tokens, rng));
  std::vector<std::string> marks;
  auto keyword_of_class = [&](std::size_t cls) {
    std::size_t count = (c.risk_keywords + 2 - cls) / 3;
    if (count == 0) return synth::keyword_token(pick(c.risk_keywords, rng));
    return synth::keyword_token(cls + 3 * pick(count, rng));
  };
  switch (type) {
    case synth::EventType::ViolentIncitement:
      marks = {keyword_of_class(0), keyword_of_class(0)};
      break;
    case synth::EventType::FalseNews:
      if (c.metaphor_tokens > 0 && c.target_tokens > 0) {
        marks = {synth::metaphor_token(pick(c.metaphor_tokens, rng)), synth::target_token(pick(c.target_tokens, rng))};
      } else {
        marks = {keyword_of_class(1), keyword_of_class(1)};
      }
      break;
    case synth::EventType::FinancialFraud:
      marks = {keyword_of_class(2), keyword_of_class(2)};
      break;
  }
  for (auto& m : marks) {
    auto at = tokens.begin() + static_cast<std::ptrdiff_t>(pick(tokens.size() + 1, rng));
    tokens.insert(at, std::move(m));
  }
  return tokens;
}

}  // namespace

std::vector<std::size_t> total_degrees(const graph::HeteroGraph& g) {
  std::vector<std::size_t> deg(g.nodes(), 0);
  for (std::size_t r = 0; r < g.relation_count(); ++r) {
    for (auto dir : {graph::Direction::In, graph::Direction::Out}) {
      const auto& adj = g.neighbors(r, dir);
      for (std::size_t i = 0; i < g.nodes(); ++i) deg[i] += adj.row_size(i);
    }
  }
  return deg;
}

EventSet inject_events(const synth::SynthCorpus& corpus, const BenchmarkConfig& config, std::uint64_t seed) {
  graph::HeteroGraph g = synth::build_corpus_graph(corpus);
  const std::size_t n = g.nodes();
  const auto degree = total_degrees(g);

  std::vector<std::size_t> risk_members, everyone(n), hubs;
  std::iota(everyone.begin(), everyone.end(), 0);
  for (const auto& u : corpus.users) {
    if (u.community != 0) risk_members.push_back(u.id);
  }
  if (risk_members.empty()) risk_members = everyone;
  hubs = everyone;
  std::stable_sort(hubs.begin(), hubs.end(), [&](std::size_t a, std::size_t b) { return degree[a] > degree[b]; });
  hubs.resize(std::max<std::size_t>(config.seeds_per_event, n / 20));

  EventSet out;
  std::set<std::size_t> touched;
  std::vector<std::set<std::size_t>> adopted_by(n);
  std::mt19937_64 adopt_rng(derive_seed(seed, kAdoptStream));
  for (std::size_t e = 0; e < std::size(kEvents); ++e) {
    std::mt19937_64 rng(derive_seed(seed, kCascadeStream + e));
    synth::CascadeEvent ev;
    ev.type = kEvents[e];
    ev.transmission.assign(config.transmission.begin(), config.transmission.end());
    ev.transmission.resize(g.relation_count(), config.transmission.back());
    auto boost = [&](std::size_t r) {
      if (r < ev.transmission.size()) ev.transmission[r] = std::min(1.0, ev.transmission[r] * 1.5);
    };
    switch (ev.type) {
      case synth::EventType::ViolentIncitement:
        ev.seeds = choose(risk_members, config.seeds_per_event, rng);
        break;
      case synth::EventType::FalseNews:
        ev.seeds = choose(hubs, config.seeds_per_event, rng);
        boost(2);
        break;
      case synth::EventType::FinancialFraud:
        ev.seeds = choose(everyone, config.seeds_per_event, rng);
        boost(1);
        boost(3);
        break;
    }
    synth::Trajectory traj = synth::simulate_cascade(g, ev, config.max_steps, rng);
    const auto& final_set = traj.infected.back();
    std::set<std::size_t> seeds(ev.seeds.begin(), ev.seeds.end());
    for (std::size_t u : final_set) {
      touched.insert(u);
      if (seeds.count(u) || std::bernoulli_distribution(config.adopt_rate)(adopt_rng)) adopted_by[u].insert(e);
    }
    out.events.push_back(std::move(ev));
    out.cascades.push_back(std::move(traj));
  }
  out.touched.assign(touched.begin(), touched.end());

  out.corpus = corpus;
  out.corpus.posts.clear();
  std::size_t next = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (; next < corpus.posts.size() && corpus.posts[next].user == u; ++next) out.corpus.posts.push_back(corpus.posts[next]);
    if (adopted_by[u].empty()) continue;
    out.adopters.push_back(u);
    out.corpus.users[u].label = 1;
    for (std::size_t e : adopted_by[u]) {
      synth::SynthPost post{u, event_post(kEvents[e], corpus.config, adopt_rng), false};
      post.metaphor = std::any_of(post.tokens.begin(), post.tokens.end(), synth::is_metaphor);
      out.corpus.posts.push_back(std::move(post));
    }
  }
  return out;
}

EfficiencyMetrics measure_efficiency(const train::Model& model, const EventSet& events, const BenchmarkConfig& config) {
  EfficiencyMetrics m;
  train::Dataset data = make_dataset(events.corpus, model.config.encoder.max_len);
  const auto& g = *data.graph;

  std::vector<std::vector<double>> scale;
  if (model.config.uses_graph()) {
    scale = graph::message_scales(g, model.gnn);
  } else {
    scale.assign(g.relation_count(), std::vector<double>(g.nodes(), 0.0));
  }
  double delay_sum = 0.0;
  for (const auto& ev : events.events) {
    auto traj = synth::relational_diffusion(g, ev.seeds, scale, config.diffusion_threshold, config.max_steps);
    delay_sum += static_cast<double>(synth::propagation_delay(traj, config.coverage));
  }
  m.delay = delay_sum / static_cast<double>(events.events.size());

  std::mt19937_64 unused(0);
  tc::Tensor features;
  {
    tc::NoGradScope no_grad;
    features = train::node_features(model, data, false, unused);
  }
  train::Scores s = train::score_users(model, data, events.touched, features);
  const auto degree = total_degrees(g);
  std::vector<int> labels;
  std::vector<std::size_t> degrees;
  for (std::size_t u : events.touched) {
    labels.push_back(data.labels[u]);
    degrees.push_back(degree[u]);
  }
  m.touched = events.touched.size();
  try {
    m.sensitivity = synth::structural_sensitivity(s.risk, labels, degrees, config.k_low, config.k_high);
  } catch (const DataError&) {
  }
  try {
    m.snr = synth::snr_db(s.risk, labels);
  } catch (const Error&) {
  }
  return m;
}

}  // namespace dghif::app
