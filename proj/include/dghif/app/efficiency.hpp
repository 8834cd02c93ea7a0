#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dghif/app/config.hpp"
#include "dghif/synthbench/cascade.hpp"
#include "dghif/synthbench/generator.hpp"
#include "dghif/trainpipe/model.hpp"

namespace dghif::app {

/// Three risk events spread over a corpus by independent cascades. Seeds
/// always adopt the event; every other touched user adopts with
/// BenchmarkConfig::adopt_rate, turning risky and gaining one post in the
/// event's token class.
struct EventSet {
  std::vector<synth::CascadeEvent> events;
  std::vector<synth::Trajectory> cascades;
  std::vector<std::size_t> touched;  // union of the final infected sets, sorted
  std::vector<std::size_t> adopters;
  synth::SynthCorpus corpus;         // the corpus after adoption
};

/// Seed placement: ViolentIncitement inside risk communities, FalseNews on
/// the top 5% of nodes by degree, FinancialFraud anywhere. FalseNews spreads
/// 1.5x faster over ShareRetweet, FinancialFraud over Comment and Mention.
EventSet inject_events(const synth::SynthCorpus& corpus, const BenchmarkConfig& config, std::uint64_t seed);

/// Undirected degree (in plus out, all relations) of every node.
std::vector<std::size_t> total_degrees(const graph::HeteroGraph& graph);

struct EfficiencyMetrics {
  double delay = 0.0;                  // mean over events, steps
  std::optional<double> sensitivity;   // percent; absent when a degree band has no risky touched user
  std::optional<double> snr;           // dB; absent when a class is missing or benign scores are constant
  std::size_t touched = 0;
};

/// Delay: deterministic relational diffusion from each event's seeds with
/// per-edge strength |omega_r| / c_{i,r} taken from the model's GNN.
/// Sensitivity and SNR: model scores of the touched users on the post-event
/// corpus against their post-event labels.
EfficiencyMetrics measure_efficiency(const train::Model& model, const EventSet& events, const BenchmarkConfig& config);

}  // namespace dghif::app
