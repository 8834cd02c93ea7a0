#include "dghif/synthbench/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dghif/common/errors.hpp"
#include "dghif/common/seed.hpp"

namespace dghif::synth {

namespace {

constexpr std::uint64_t kGraphStream = 1;
constexpr std::uint64_t kCorpusStream = 2;

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) throw ConfigError(fmt::format("synth.{}: {}", field, why));
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

bool bernoulli(double p, std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::size_t uniform_index(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::uint64_t pair_key(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

std::vector<std::size_t> sample_degrees(const SynthConfig& c, std::mt19937_64& rng) {
  std::size_t k_max = c.effective_max_degree();
  std::vector<double> weights;
  for (std::size_t k = c.min_degree; k <= k_max; ++k) weights.push_back(std::pow(static_cast<double>(k), -c.exponent));
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  std::vector<std::size_t> degrees(c.nodes);
  for (auto& k : degrees) k = c.min_degree + dist(rng);
  return degrees;
}

struct Wiring {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::unordered_set<std::uint64_t> keys;

  bool try_add(std::size_t a, std::size_t b) {
    if (a == b || !keys.insert(pair_key(a, b)).second) return false;
    edges.emplace_back(a, b);
    return true;
  }
};

// Pairs consecutive stubs of a shuffled pool; rejected stubs go to `leftover`.
void pair_pool(std::vector<std::size_t>& pool, Wiring& wiring, std::vector<std::size_t>& leftover,
               std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t i = 0;
  for (; i + 1 < pool.size(); i += 2) {
    if (!wiring.try_add(pool[i], pool[i + 1])) {
      leftover.push_back(pool[i]);
      leftover.push_back(pool[i + 1]);
    }
  }
  if (i < pool.size()) leftover.push_back(pool[i]);
}

std::size_t pick_relation(const std::array<double, kRelations>& mix, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> dist(mix.begin(), mix.end());
  return dist(rng);
}

std::vector<std::string> filler_run(const SynthConfig& c, std::mt19937_64& rng) {
  std::size_t len = uniform_index(c.min_post_len, c.max_post_len, rng);
  std::vector<std::string> tokens(len);
  for (auto& t : tokens) t = filler_token(uniform_index(0, c.filler_tokens - 1, rng));
  return tokens;
}

void insert_at_random(std::vector<std::string>& tokens, std::string token, std::mt19937_64& rng) {
  std::size_t at = uniform_index(0, tokens.size(), rng);
  tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), std::move(token));
}

bool has_prefix(const std::string& token, const char* prefix) {
  return token.size() > 2 && token.compare(0, 2, prefix) == 0 &&
         std::all_of(token.begin() + 2, token.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

}  // namespace

std::size_t SynthConfig::effective_max_degree() const noexcept {
  std::size_t k = max_degree ? max_degree : nodes / 10;
  return std::max(k, min_degree);
}

void SynthConfig::validate() const {
  require(nodes >= 10, "nodes", "at least 10 nodes are required");
  require(nodes < (std::size_t{1} << 32), "nodes", "node ids must fit in 32 bits");
  require(exponent > 1.0, "exponent", "must exceed 1");
  require(min_degree >= 1, "min_degree", "must be at least 1");
  require(effective_max_degree() < nodes, "max_degree", "must be below the node count");
  for (double p : relation_mix) require(p >= 0.0, "relation_mix", "proportions must be non-negative");
  for (double p : risk_relation_mix) require(p >= 0.0, "risk_relation_mix", "proportions must be non-negative");
  require(std::accumulate(relation_mix.begin(), relation_mix.end(), 0.0) > 0.0, "relation_mix", "all zero");
  require(std::accumulate(risk_relation_mix.begin(), risk_relation_mix.end(), 0.0) > 0.0, "risk_relation_mix",
          "all zero");
  require(probability(risk_community_fraction), "risk_community_fraction", "must lie in [0, 1]");
  require(probability(homophily), "homophily", "must lie in [0, 1]");
  require(probability(risk_rate), "risk_rate", "must lie in [0, 1]");
  require(probability(background_risk_factor), "background_risk_factor", "must lie in [0, 1]");
  require(probability(silent_rate), "silent_rate", "must lie in [0, 1]");
  require(probability(signal_post_rate), "signal_post_rate", "must lie in [0, 1]");
  require(probability(metaphor_rate), "metaphor_rate", "must lie in [0, 1]");
  require(probability(decoy_rate), "decoy_rate", "must lie in [0, 1]");
  require(risk_communities >= 1 || risk_community_fraction == 0.0, "risk_communities",
          "needs at least one community when risk_community_fraction > 0");
  require(min_posts >= 1, "min_posts", "every user needs at least one post");
  require(max_posts >= min_posts, "max_posts", "must be >= min_posts");
  require(min_post_len >= 1, "min_post_len", "must be at least 1");
  require(max_post_len >= min_post_len, "max_post_len", "must be >= min_post_len");
  require(risk_keywords >= 3, "risk_keywords", "need at least one keyword per event class");
  require(metaphor_tokens >= 1, "metaphor_tokens", "must be at least 1");
  require(target_tokens >= 1, "target_tokens", "must be at least 1");
  require(filler_tokens >= 1, "filler_tokens", "must be at least 1");
}

std::string filler_token(std::size_t i) { return fmt::format("w{}", i); }
std::string keyword_token(std::size_t i) { return fmt::format("rk{}", i); }
std::string metaphor_token(std::size_t i) { return fmt::format("mt{}", i); }
std::string target_token(std::size_t i) { return fmt::format("tg{}", i); }
bool is_keyword(const std::string& token) { return has_prefix(token, "rk"); }
bool is_metaphor(const std::string& token) { return has_prefix(token, "mt"); }
bool is_target(const std::string& token) { return has_prefix(token, "tg"); }

std::vector<std::string> corpus_vocabulary(const SynthConfig& c) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < c.filler_tokens; ++i) out.push_back(filler_token(i));
  for (std::size_t i = 0; i < c.risk_keywords; ++i) out.push_back(keyword_token(i));
  for (std::size_t i = 0; i < c.metaphor_tokens; ++i) out.push_back(metaphor_token(i));
  for (std::size_t i = 0; i < c.target_tokens; ++i) out.push_back(target_token(i));
  return out;
}

SynthGraph generate_powerlaw_graph(const SynthConfig& c) {
  c.validate();
  std::mt19937_64 rng(derive_seed(c.seed, kGraphStream));
  const std::size_t n = c.nodes;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> community(n, 0);
  auto risk_users = static_cast<std::size_t>(std::llround(c.risk_community_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < risk_users; ++i) community[order[i]] = 1 + i % c.risk_communities;
  std::size_t groups = 1 + (risk_users > 0 ? c.risk_communities : 0);

  std::vector<std::size_t> degrees = sample_degrees(c, rng);
  if (std::accumulate(degrees.begin(), degrees.end(), std::size_t{0}) % 2 == 1) {
    auto top = std::max_element(degrees.begin(), degrees.end());
    if (*top > 1) {
      --*top;
    } else {
      ++*top;
    }
    spdlog::info("degree sequence had an odd stub count; adjusted node {} to degree {}", top - degrees.begin(),
                 *top);
  }

  std::vector<std::vector<std::size_t>> internal(groups);
  std::vector<std::size_t> external;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t s = 0; s < degrees[u]; ++s) {
      if (bernoulli(c.homophily, rng)) {
        internal[community[u]].push_back(u);
      } else {
        external.push_back(u);
      }
    }
  }

  Wiring wiring;
  std::vector<std::size_t> leftover;
  for (auto& pool : internal) {
    std::vector<std::size_t> rest;
    pair_pool(pool, wiring, rest, rng);
    for (int round = 0; round < 20 && rest.size() > 1; ++round) {
      std::vector<std::size_t> retry;
      retry.swap(rest);
      pair_pool(retry, wiring, rest, rng);
    }
    leftover.insert(leftover.end(), rest.begin(), rest.end());
  }
  external.insert(external.end(), leftover.begin(), leftover.end());
  leftover.clear();
  pair_pool(external, wiring, leftover, rng);
  for (int round = 0; round < 20 && leftover.size() > 1; ++round) {
    std::vector<std::size_t> pool;
    pool.swap(leftover);
    pair_pool(pool, wiring, leftover, rng);
  }
  if (!leftover.empty()) spdlog::debug("dropped {} unmatched stubs", leftover.size());

  std::vector<std::size_t> realized(n, 0);
  for (const auto& [a, b] : wiring.edges) {
    ++realized[a];
    ++realized[b];
  }
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t u = 0; u < n; ++u) members[community[u]].push_back(u);
  std::size_t repaired = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (realized[u] > 0) continue;
    const auto& pool = members[community[u]].size() > 1 ? members[community[u]] : order;
    std::size_t v = u;
    while (v == u) v = pool[uniform_index(0, pool.size() - 1, rng)];
    wiring.try_add(u, v);
    ++realized[u];
    ++realized[v];
    ++repaired;
  }
  if (repaired) spdlog::debug("attached {} isolated nodes", repaired);

  std::vector<graph::Interaction> interactions;
  interactions.reserve(wiring.edges.size());
  for (auto [a, b] : wiring.edges) {
    bool inside_risk = community[a] != 0 && community[a] == community[b];
    std::size_t rel = pick_relation(inside_risk ? c.risk_relation_mix : c.relation_mix, rng);
    if (bernoulli(0.5, rng)) std::swap(a, b);
    interactions.push_back({a, rel, b});
  }
  graph::HeteroGraph g = graph::build_graph(n, interactions);
  return SynthGraph{std::move(g), std::move(community), std::move(interactions)};
}

SynthCorpus generate_corpus(const SynthConfig& c, const SynthGraph& graph) {
  c.validate();
  if (graph.graph.nodes() != c.nodes || graph.community.size() != c.nodes) {
    throw DataError(fmt::format("graph has {} nodes but the config asks for {}", graph.graph.nodes(), c.nodes));
  }
  std::mt19937_64 rng(derive_seed(c.seed, kCorpusStream));
  SynthCorpus corpus;
  corpus.config = c;
  corpus.interactions = graph.interactions;
  corpus.users.reserve(c.nodes);

  const double background_rate = c.risk_rate * c.background_risk_factor;
  for (std::size_t u = 0; u < c.nodes; ++u) {
    std::size_t comm = graph.community[u];
    int label = bernoulli(comm ? c.risk_rate : background_rate, rng) ? 1 : 0;
    corpus.users.push_back({u, label, comm});

    std::size_t n_posts = uniform_index(c.min_posts, c.max_posts, rng);
    std::vector<SynthPost> posts(n_posts);
    for (auto& p : posts) {
      p.user = u;
      p.tokens = filler_run(c, rng);
    }

    if (label == 1) {
      bool silent = bernoulli(c.silent_rate, rng);
      if (!silent) {
        std::vector<bool> signal(n_posts);
        bool any = false;
        for (std::size_t i = 0; i < n_posts; ++i) any |= (signal[i] = bernoulli(c.signal_post_rate, rng));
        if (!any) signal[uniform_index(0, n_posts - 1, rng)] = true;
        for (std::size_t i = 0; i < n_posts; ++i) {
          if (!signal[i]) continue;
          if (bernoulli(c.metaphor_rate, rng)) {
            insert_at_random(posts[i].tokens, metaphor_token(uniform_index(0, c.metaphor_tokens - 1, rng)), rng);
            insert_at_random(posts[i].tokens, target_token(uniform_index(0, c.target_tokens - 1, rng)), rng);
          } else {
            std::size_t count = uniform_index(1, 2, rng);
            for (std::size_t k = 0; k < count; ++k) {
              insert_at_random(posts[i].tokens, keyword_token(uniform_index(0, c.risk_keywords - 1, rng)), rng);
            }
          }
        }
      }
    } else if (c.risk_rate > 0.0 && bernoulli(c.decoy_rate, rng)) {
      // Half of a metaphor pair: a metaphor token without a target, or the reverse.
      auto& post = posts[uniform_index(0, n_posts - 1, rng)];
      bool use_metaphor = c.metaphor_rate > 0.0 && bernoulli(0.5, rng);
      insert_at_random(post.tokens,
                       use_metaphor ? metaphor_token(uniform_index(0, c.metaphor_tokens - 1, rng))
                                    : target_token(uniform_index(0, c.target_tokens - 1, rng)),
                       rng);
    }

    for (auto& p : posts) {
      p.metaphor = std::any_of(p.tokens.begin(), p.tokens.end(), [](const std::string& t) { return is_metaphor(t); });
      corpus.posts.push_back(std::move(p));
    }
  }
  return corpus;
}

SynthCorpus generate(const SynthConfig& config) {
  SynthGraph graph = generate_powerlaw_graph(config);
  return generate_corpus(config, graph);
}

double hurwitz_zeta(double s, double q) {
  if (!(s > 1.0) || !(q > 0.0)) throw DomainError("hurwitz_zeta: needs s > 1 and q > 0");
  // Direct sum to N, then the Euler-Maclaurin tail.
  constexpr int kTerms = 1000;
  double sum = 0.0;
  for (int k = 0; k < kTerms; ++k) sum += std::pow(q + k, -s);
  double n = q + kTerms;
  sum += std::pow(n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(n, -s) + s * std::pow(n, -s - 1.0) / 12.0 -
         s * (s + 1.0) * (s + 2.0) * std::pow(n, -s - 3.0) / 720.0;
  return sum;
}

double fit_powerlaw_exponent(std::span<const std::size_t> degrees, std::size_t k_min) {
  if (k_min < 1) throw DomainError("fit_powerlaw_exponent: k_min must be at least 1");
  double sum_log = 0.0;
  std::size_t n = 0;
  for (std::size_t k : degrees) {
    if (k < k_min) continue;
    sum_log += std::log(static_cast<double>(k));
    ++n;
  }
  if (n == 0) throw DataError(fmt::format("fit_powerlaw_exponent: no degree >= {}", k_min));
  const double q = static_cast<double>(k_min);
  const double mean_log = sum_log / static_cast<double>(n);
  if (mean_log <= std::log(q)) throw DataError(fmt::format("fit_powerlaw_exponent: every degree equals {}", k_min));
  // Per-sample negative log-likelihood is unimodal in the exponent.
  auto nll = [&](double a) { return a * mean_log + std::log(hurwitz_zeta(a, q)); };
  double lo = 1.0 + 1e-6, hi = 10.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = nll(x1), f2 = nll(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = nll(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = nll(x2);
    }
  }
  return 0.5 * (lo + hi);
}

graph::HeteroGraph build_corpus_graph(const SynthCorpus& corpus) {
  return graph::build_graph(corpus.users.size(), corpus.interactions);
}

}  // namespace dghif::synth
