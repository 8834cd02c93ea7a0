#include "dghif/synthbench/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"

namespace dghif::synth {

namespace {

void check_seeds(const graph::HeteroGraph& g, std::span<const std::size_t> seeds) {
  if (seeds.empty()) throw DataError("cascade: empty seed set");
  for (std::size_t s : seeds) {
    if (s >= g.nodes()) throw DataError(fmt::format("cascade: seed {} is not a node (graph has {})", s, g.nodes()));
  }
}

std::vector<std::size_t> unique_sorted(std::span<const std::size_t> ids) {
  std::vector<std::size_t> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Breadth-first reach along out-edges of the relations with `usable[r]`.
template <typename Usable>
std::size_t reachable_count(const graph::HeteroGraph& g, const std::vector<std::size_t>& seeds, Usable usable) {
  std::vector<char> seen(g.nodes(), 0);
  std::queue<std::size_t> frontier;
  for (std::size_t s : seeds) {
    seen[s] = 1;
    frontier.push(s);
  }
  std::size_t count = seeds.size();
  while (!frontier.empty()) {
    std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t r = 0; r < g.relation_count(); ++r) {
      const tc::Csr& out = g.neighbors(r, graph::Direction::Out);
      for (std::size_t k = out.offsets[u]; k < out.offsets[u + 1]; ++k) {
        std::size_t v = out.indices[k];
        if (seen[v] || !usable(r, v)) continue;
        seen[v] = 1;
        ++count;
        frontier.push(v);
      }
    }
  }
  return count;
}

}  // namespace

std::string_view to_string(EventType type) noexcept {
  switch (type) {
    case EventType::ViolentIncitement: return "violent_incitement";
    case EventType::FalseNews: return "false_news";
    case EventType::FinancialFraud: return "financial_fraud";
  }
  return "unknown";
}

Trajectory simulate_cascade(const graph::HeteroGraph& g, const CascadeEvent& event, std::size_t max_steps,
                            std::mt19937_64& rng) {
  check_seeds(g, event.seeds);
  if (event.transmission.size() != g.relation_count()) {
    throw DataError(fmt::format("cascade: {} transmission probabilities for {} relations", event.transmission.size(),
                                g.relation_count()));
  }
  for (double p : event.transmission) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError(fmt::format("cascade: transmission probability {} outside [0, 1]", p));
  }

  Trajectory traj;
  traj.max_steps = max_steps;
  std::vector<std::size_t> seeds = unique_sorted(event.seeds);
  traj.reachable = reachable_count(g, seeds, [&](std::size_t r, std::size_t) { return event.transmission[r] > 0.0; });

  std::vector<char> infected(g.nodes(), 0);
  for (std::size_t s : seeds) infected[s] = 1;
  traj.infected.push_back(seeds);
  std::vector<std::size_t> fresh = seeds;
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  for (std::size_t step = 1; step <= max_steps && !fresh.empty(); ++step) {
    std::vector<std::size_t> next;
    for (std::size_t u : fresh) {
      for (std::size_t r = 0; r < g.relation_count(); ++r) {
        const tc::Csr& out = g.neighbors(r, graph::Direction::Out);
        for (std::size_t k = out.offsets[u]; k < out.offsets[u + 1]; ++k) {
          std::size_t v = out.indices[k];
          if (infected[v]) continue;
          if (coin(rng) < event.transmission[r]) {
            infected[v] = 1;
            next.push_back(v);
          }
        }
      }
    }
    if (next.empty()) break;
    std::vector<std::size_t> all = traj.infected.back();
    all.insert(all.end(), next.begin(), next.end());
    std::sort(all.begin(), all.end());
    traj.infected.push_back(std::move(all));
    fresh = std::move(next);
  }
  return traj;
}

Trajectory relational_diffusion(const graph::HeteroGraph& g, std::span<const std::size_t> seed_span,
                                const std::vector<std::vector<double>>& scale, double threshold,
                                std::size_t max_steps) {
  check_seeds(g, seed_span);
  if (scale.size() != g.relation_count()) {
    throw DataError(fmt::format("diffusion: {} scale rows for {} relations", scale.size(), g.relation_count()));
  }
  for (const auto& row : scale) {
    if (row.size() != g.nodes()) throw DataError("diffusion: scale rows must have one entry per node");
  }
  if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("diffusion: threshold must lie in (0, 1]");

  Trajectory traj;
  traj.max_steps = max_steps;
  std::vector<std::size_t> seeds = unique_sorted(seed_span);
  traj.reachable = reachable_count(g, seeds, [&](std::size_t r, std::size_t v) { return scale[r][v] > 0.0; });

  const std::size_t n = g.nodes();
  std::vector<double> s(n, 0.0);
  for (std::size_t v : seeds) s[v] = 1.0;
  traj.infected.push_back(seeds);

  for (std::size_t step = 1; step <= max_steps; ++step) {
    std::vector<double> next = s;
    for (std::size_t r = 0; r < g.relation_count(); ++r) {
      const tc::Csr& in = g.neighbors(r, graph::Direction::In);
      for (std::size_t i = 0; i < n; ++i) {
        if (scale[r][i] == 0.0) continue;
        double acc = 0.0;
        for (std::size_t k = in.offsets[i]; k < in.offsets[i + 1]; ++k) acc += s[in.indices[k]];
        next[i] += scale[r][i] * acc;
      }
    }
    for (double& x : next) x = std::min(1.0, x);
    s.swap(next);
    std::vector<std::size_t> reached;
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i] >= threshold) reached.push_back(i);
    }
    bool grew = reached.size() > traj.infected.back().size();
    traj.infected.push_back(std::move(reached));
    if (!grew && traj.infected.back().size() >= traj.reachable) break;
  }
  return traj;
}

std::size_t propagation_delay(const Trajectory& traj, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw DomainError("propagation_delay: coverage must lie in (0, 1]");
  if (traj.reachable == 0) return traj.max_steps + 1;
  auto needed = static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(traj.reachable) - 1e-9));
  for (std::size_t t = 0; t < traj.infected.size(); ++t) {
    if (traj.infected[t].size() >= needed) return t;
  }
  return traj.max_steps + 1;
}

}  // namespace dghif::synth
