#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>

#include "dghif/app/checkpoint.hpp"
#include "dghif/app/config.hpp"
#include "dghif/app/efficiency.hpp"
#include "dghif/synthbench/generator.hpp"
#include "dghif/trainpipe/trainer.hpp"

namespace dghif::app {

/// Tokenizes a synthetic corpus with its own vocabulary and attaches the
/// interaction graph. Users without edges get has_graph = false.
train::Dataset make_dataset(const synth::SynthCorpus& corpus, std::size_t max_len);

/// Model with the configured architecture, initialised from the run seed.
train::Model init_model(const ExperimentConfig& config, const train::Dataset& data, std::uint64_t seed);

/// Median wall-clock milliseconds of `samples` single-user predictions on
/// users drawn from `seed`. Graph embeddings are computed once beforehand.
double measure_latency(const train::Model& model, const train::Dataset& data, const tc::Tensor& features,
                       std::size_t samples, std::uint64_t seed);

struct VariantRun {
  train::TrainResult result;
  double latency_ms = 0.0;
  std::optional<EfficiencyMetrics> efficiency;
};

/// Generates the corpus for `seed` (synth.seed is replaced by it), builds and
/// trains the model, measures latency (skipped when latency_samples is 0)
/// and, on request, the efficiency metrics of injected events.
VariantRun run_variant(const ExperimentConfig& config, std::uint64_t seed, bool with_efficiency = false);

/// Corpus, dataset, model and trainer of one training run. Held by pointer
/// because the trainer keeps references to the model and dataset.
struct TrainSession {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  synth::SynthCorpus corpus;
  train::Dataset data;
  train::Model model;
  std::unique_ptr<train::Trainer> trainer;

  Checkpoint checkpoint() const { return capture(config, seed, model, *trainer); }
};

/// Fresh session on `corpus` with the model initialised from `seed`.
std::unique_ptr<TrainSession> open_session(const ExperimentConfig& config, synth::SynthCorpus corpus,
                                           std::uint64_t seed);

/// Session continuing from a checkpoint: parameters, optimizer moments, RNG
/// and history are restored. `config` must hash like the checkpoint's
/// config unless `force` is set.
std::unique_ptr<TrainSession> resume_session(const ExperimentConfig& config, synth::SynthCorpus corpus,
                                             const Checkpoint& ckpt, bool force = false);

/// Model rebuilt from a checkpoint for inference on `corpus`. DataError when
/// the corpus does not fit the stored tensors.
struct ScoringModel {
  ExperimentConfig config;
  train::Dataset data;
  train::Model model;
  tc::Tensor features;
};
ScoringModel load_for_scoring(const Checkpoint& ckpt, const synth::SynthCorpus& corpus);

}  // namespace dghif::app
