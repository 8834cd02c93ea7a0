#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dghif/app/ablation.hpp"
#include "dghif/app/config.hpp"
#include "dghif/tensorcore/grad_check.hpp"

namespace dghif::app {

namespace fs = std::filesystem;

/// Reads the corpus in `dir` when given, otherwise generates one from the
/// config with synth.seed replaced by `seed`.
synth::SynthCorpus resolve_corpus(const ExperimentConfig& config, const std::optional<fs::path>& dir,
                                  std::uint64_t seed);

/// Writes a corpus for `seed` into `out` (created when missing).
void cmd_generate(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out);

struct TrainOptions {
  std::uint64_t seed = 1;
  std::optional<fs::path> corpus;
  fs::path out = "out";
  std::optional<fs::path> resume;  // checkpoint to continue from
  bool force = false;              // accept a config that differs from the checkpoint's
  std::optional<std::size_t> stop_after_epochs;  // stop early, leaving a resumable checkpoint
};

struct TrainOutcome {
  train::RunSummary summary;
  bool finished = false;
  fs::path checkpoint;
  fs::path history;
};

/// Trains, writing out/checkpoint.bin after every epoch plus out/history.csv
/// and out/config.cfg. With `resume` the run continues from the checkpoint.
TrainOutcome cmd_train(const ExperimentConfig& config, const TrainOptions& options);

/// Runs a built-in grid over `seeds` and writes ablation_<grid>.csv,
/// seeds_<grid>.csv and latency_<grid>.csv into `out`.
std::vector<AblationRow> cmd_ablate(const ExperimentConfig& config, const std::string& grid,
                                    const std::vector<std::uint64_t>& seeds, const fs::path& out);

/// Runs the four normalisation / relation-weight variants with event
/// injection and writes efficiency.csv and efficiency_seeds.csv into `out`.
std::vector<EfficiencyRow> cmd_benchmark(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds,
                                         const fs::path& out);

struct ScoreOutcome {
  std::size_t users = 0;
  std::size_t bypassed = 0;
  double val_f1 = 0.0;  // F1 on the checkpoint's validation split
};

/// Scores every user of the corpus (the checkpoint's own corpus when `corpus`
/// is empty) and writes user_id,risk_score,mean_gate,label to `out_csv`.
ScoreOutcome cmd_score(const fs::path& checkpoint, const std::optional<fs::path>& corpus, const fs::path& out_csv);

struct GradCheckSummary {
  std::vector<std::pair<std::string, tc::GradCheckReport>> reports;  // primitives, then the joint loss
  bool passed() const;
};

/// Finite-difference checks of every primitive at `points` random inputs and
/// of the four-user joint loss under each lambda mode.
GradCheckSummary cmd_grad_check(std::size_t points, std::uint64_t seed);

}  // namespace dghif::app
