#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dghif/relgraph/graph.hpp"

namespace dghif::synth {

inline constexpr std::size_t kRelations = 4;  // Follow, Comment, ShareRetweet, Mention

struct SynthConfig {
  std::size_t nodes = 1000;
  double exponent = 2.1;
  std::size_t min_degree = 1;
  std::size_t max_degree = 0;  // 0 means nodes / 10
  // Relation proportions for edges in general and for edges inside one risk community.
  std::array<double, kRelations> relation_mix{0.4, 0.25, 0.2, 0.15};
  std::array<double, kRelations> risk_relation_mix{0.2, 0.15, 0.5, 0.15};

  std::size_t risk_communities = 4;
  double risk_community_fraction = 0.25;  // share of users placed in risk communities
  double homophily = 0.85;                // probability that a stub is wired inside its community
  double risk_rate = 0.8;                 // label probability inside a risk community
  double background_risk_factor = 0.05;   // background label probability = risk_rate * factor
  double silent_rate = 0.3;               // risk users whose posts carry no signal
  double signal_post_rate = 0.6;          // per-post signal probability for vocal risk users
  double metaphor_rate = 0.4;             // share of signal posts written as metaphor + target
  double decoy_rate = 0.1;                // benign users with one half-signal post

  std::size_t min_posts = 1;
  std::size_t max_posts = 4;
  std::size_t min_post_len = 8;
  std::size_t max_post_len = 24;

  std::size_t risk_keywords = 30;
  std::size_t metaphor_tokens = 20;
  std::size_t target_tokens = 20;
  std::size_t filler_tokens = 400;

  std::uint64_t seed = 1;

  std::size_t effective_max_degree() const noexcept;
  /// Calls f(name, field) for every field in declaration order.
  template <typename Self, typename F>
  static void for_each_field(Self& c, F&& f);
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

template <typename Self, typename F>
void SynthConfig::for_each_field(Self& c, F&& f) {
  f("nodes", c.nodes);
  f("exponent", c.exponent);
  f("min_degree", c.min_degree);
  f("max_degree", c.max_degree);
  f("relation_mix", c.relation_mix);
  f("risk_relation_mix", c.risk_relation_mix);
  f("risk_communities", c.risk_communities);
  f("risk_community_fraction", c.risk_community_fraction);
  f("homophily", c.homophily);
  f("risk_rate", c.risk_rate);
  f("background_risk_factor", c.background_risk_factor);
  f("silent_rate", c.silent_rate);
  f("signal_post_rate", c.signal_post_rate);
  f("metaphor_rate", c.metaphor_rate);
  f("decoy_rate", c.decoy_rate);
  f("min_posts", c.min_posts);
  f("max_posts", c.max_posts);
  f("min_post_len", c.min_post_len);
  f("max_post_len", c.max_post_len);
  f("risk_keywords", c.risk_keywords);
  f("metaphor_tokens", c.metaphor_tokens);
  f("target_tokens", c.target_tokens);
  f("filler_tokens", c.filler_tokens);
  f("seed", c.seed);
}

struct SynthUser {
  std::size_t id = 0;
  int label = 0;
  std::size_t community = 0;  // 0 is the background, 1..K are risk communities
};

struct SynthPost {
  std::size_t user = 0;
  std::vector<std::string> tokens;
  bool metaphor = false;
};

struct SynthGraph {
  graph::HeteroGraph graph;
  std::vector<std::size_t> community;
  std::vector<graph::Interaction> interactions;
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<SynthUser> users;
  std::vector<SynthPost> posts;  // grouped by user in id order
  std::vector<graph::Interaction> interactions;
};

/// Token spellings; keyword j belongs to event class j % 3.
std::string filler_token(std::size_t i);
std::string keyword_token(std::size_t i);
std::string metaphor_token(std::size_t i);
std::string target_token(std::size_t i);
bool is_keyword(const std::string& token);
bool is_metaphor(const std::string& token);
bool is_target(const std::string& token);

/// Every token the generator can emit, filler first.
std::vector<std::string> corpus_vocabulary(const SynthConfig& config);

/// Power-law degree sequence wired by configuration-model pairing with
/// community homophily, rejecting self-loops and repeated pairs. Nodes left
/// without edges are attached to a random partner.
SynthGraph generate_powerlaw_graph(const SynthConfig& config);

/// Labels, posts and interactions for the users of `graph`.
SynthCorpus generate_corpus(const SynthConfig& config, const SynthGraph& graph);

/// Graph and corpus in one call.
SynthCorpus generate(const SynthConfig& config);

/// Maximum-likelihood exponent of a discrete power law P(k) = k^-a / zeta(a, k_min)
/// fitted to the degrees >= k_min. DataError when no degree qualifies.
double fit_powerlaw_exponent(std::span<const std::size_t> degrees, std::size_t k_min);

/// Hurwitz zeta sum_{k>=0} (q + k)^-s for s > 1, q > 0.
double hurwitz_zeta(double s, double q);

graph::HeteroGraph build_corpus_graph(const SynthCorpus& corpus);

}  // namespace dghif::synth
