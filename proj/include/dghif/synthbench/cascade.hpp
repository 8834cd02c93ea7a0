#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "dghif/relgraph/graph.hpp"

namespace dghif::synth {

enum class EventType { ViolentIncitement, FalseNews, FinancialFraud };

std::string_view to_string(EventType type) noexcept;

struct CascadeEvent {
  EventType type = EventType::ViolentIncitement;
  std::vector<std::size_t> seeds;
  std::vector<double> transmission;  // one probability per relation
};

/// Cumulative infected sets, one per step; step 0 is the seed set.
struct Trajectory {
  std::vector<std::vector<std::size_t>> infected;  // each sorted ascending
  std::size_t reachable = 0;  // nodes reachable from the seeds, seeds included
  std::size_t max_steps = 0;
};

/// Synchronous independent cascade: every node infected at step t tries each
/// of its out-edges once at step t+1, succeeding with the relation's
/// transmission probability. Stops when a step infects nobody or after
/// max_steps. DataError on an empty or out-of-range seed set; DomainError on
/// a probability outside [0, 1].
Trajectory simulate_cascade(const graph::HeteroGraph& graph, const CascadeEvent& event, std::size_t max_steps,
                            std::mt19937_64& rng);

/// Deterministic relational diffusion driven by per-node message scales:
///   s_i <- min(1, s_i + sum_r scale[r][i] * sum_{j -> i under r} s_j)
/// with s = 1 on the seeds. A node counts as reached once s_i >= threshold.
/// Relations whose scale is zero everywhere do not extend the reachable set.
Trajectory relational_diffusion(const graph::HeteroGraph& graph, std::span<const std::size_t> seeds,
                                const std::vector<std::vector<double>>& scale, double threshold,
                                std::size_t max_steps);

/// First step at which the reached share of the reachable set is at least
/// `coverage`; max_steps + 1 when that never happens.
std::size_t propagation_delay(const Trajectory& trajectory, double coverage = 1.0);

}  // namespace dghif::synth
