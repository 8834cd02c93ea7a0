#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dghif/synthbench/generator.hpp"
#include "dghif/trainpipe/trainer.hpp"

namespace dghif::app {

inline constexpr int kConfigFormatVersion = 1;

struct BenchmarkConfig {
  std::size_t max_steps = 50;          // cascade and diffusion horizon
  double coverage = 1.0;               // share of the reachable set that counts as spread
  double diffusion_threshold = 0.5;    // activation level at which a node counts as reached
  std::size_t k_low = 5;               // low-degree band: degree <= k_low
  std::size_t k_high = 20;             // high-degree band: degree >= k_high
  std::size_t seeds_per_event = 3;
  double adopt_rate = 0.5;             // touched nodes that adopt the event's risk label
  // Transmission probability per relation (Follow, Comment, ShareRetweet, Mention).
  std::array<double, synth::kRelations> transmission{0.1, 0.1, 0.24, 0.1};
};

struct RunConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "out";
  std::size_t latency_samples = 1000;
  std::size_t workers = 1;
};

/// Every knob of an experiment. The [ablation] section writes into the model
/// and training sections (semantic guide, normalisation, fusion mode,
/// relation weights, stage skips).
struct ExperimentConfig {
  int format_version = kConfigFormatVersion;
  synth::SynthConfig synth;
  train::ModelConfig model;
  train::TrainConfig train;
  BenchmarkConfig benchmark;
  RunConfig run;

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Unknown keys, duplicate keys, malformed values and a missing or
/// unsupported format_version are ConfigErrors naming the key.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form listing every key; doubles use %.17g so that parsing
/// the output reproduces the config exactly.
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a of the canonical text form.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Applies one `section.key=value` assignment (used for command-line
/// overrides and ablation grids).
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Every known key in canonical order.
std::vector<std::string> config_keys();

}  // namespace dghif::app
