#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dghif/trainpipe/metrics.hpp"
#include "dghif/trainpipe/model.hpp"
#include "dghif/trainpipe/optimizer.hpp"

namespace dghif::train {

enum class Stage { TextPretrain, GraphPretrain, Joint };

std::string_view to_string(Stage stage) noexcept;

struct StageSpec {
  Stage stage = Stage::Joint;
  std::size_t epochs = 1;
  double lr = 1e-5;
  double lr_min = 1e-7;
  double warmup_frac = 0.1;
  std::set<std::string> frozen;              // groups that must not change
  std::map<std::string, double> group_lr;    // learning-rate multipliers
  std::size_t burn_in_epochs = 0;            // Joint: epochs before the text group unfreezes
};

struct StagePlan {
  std::vector<StageSpec> stages;

  /// Joint must appear exactly once, last; pretraining stages at most once
  /// each, text before graph. Throws ConfigError otherwise.
  void validate() const;
  bool has(Stage stage) const;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t text_pretrain_epochs = 5;
  std::size_t graph_pretrain_epochs = 5;
  std::size_t joint_epochs = 30;
  double pretrain_lr = 1e-5;
  double lr = 1e-5;
  double lr_min = 1e-7;
  double warmup_frac = 0.1;
  double text_lr_multiplier = 0.1;
  std::size_t burn_in_epochs = 1;
  std::size_t patience = 5;
  double val_fraction = 0.15;
  double threshold = 0.5;
  double mask_rate = 0.15;
  std::size_t edge_batch = 32;  // positive pairs per relational-loss batch
  AdamWConfig adamw;
  LambdaMode lambda_mode = LambdaMode::Fixed;
  double lambda0 = 0.5;
  bool skip_text_pretrain = false;
  bool skip_graph_pretrain = false;

  void validate() const;
};

/// The standard three-stage plan minus skipped stages and stages the model
/// mode has no use for (no text pretraining without text, no graph
/// pretraining without a graph).
StagePlan make_plan(const TrainConfig& config, const ModelConfig& model);

struct Split {
  std::vector<std::size_t> train, val;  // both sorted ascending
};

/// Per-label random split holding out round(val_fraction * class size) of
/// each class. DataError when either side would be empty.
Split stratified_split(std::span<const int> labels, double val_fraction, std::uint64_t seed);

struct HistoryRow {
  std::size_t epoch = 0;  // 1-based over the whole plan
  Stage stage = Stage::Joint;
  double train_loss = 0.0;
  std::optional<double> val_f1, val_precision, val_recall, metaphor_acc, lambda_eff, mean_gate;
};

/// CSV with header epoch,stage,train_loss,val_F1,val_precision,val_recall,
/// metaphor_acc,lambda_eff,mean_gate. Absent values are empty fields.
void write_history(std::ostream& out, const std::vector<HistoryRow>& rows);

struct TrainerState {
  std::size_t stage_index = 0;
  std::size_t stage_epoch = 0;  // completed epochs in the current stage
  std::size_t stage_step = 0;   // optimizer steps in the current stage
  std::size_t epoch = 0;        // completed epochs overall
  double best_f1 = -1.0;
  std::size_t best_epoch = 0;  // joint-stage epoch of best_f1, 1-based
  std::size_t since_best = 0;
  bool finished = false;
  std::vector<HistoryRow> history;
  std::string rng;  // serialized engine state
};

struct RunSummary {
  double best_val_f1 = 0.0;             // validation F1 at the early-stopping epoch
  std::optional<double> metaphor_acc;   // at the same epoch
  std::size_t convergence_epoch = 0;    // joint-stage epoch of the best F1
  double final_val_f1 = 0.0;
  std::size_t joint_epochs_run = 0;
};

/// Runs a StagePlan one epoch at a time. All randomness after construction
/// comes from one engine whose state is part of TrainerState, so a run can
/// be stopped at any epoch boundary and resumed exactly.
class Trainer {
 public:
  Trainer(Model& model, const Dataset& data, TrainConfig config, StagePlan plan, std::uint64_t seed);

  /// Runs whole epochs until the plan finishes or `max_epochs` epochs ran;
  /// `on_epoch` is called after each epoch.
  void run(std::size_t max_epochs = std::numeric_limits<std::size_t>::max(),
           const std::function<void(const Trainer&)>& on_epoch = {});

  bool finished() const noexcept { return state_.finished; }
  TrainerState state() const;
  /// Resumes from a saved state; `moments` must match the optimizer layout.
  void restore(const TrainerState& state, std::vector<MomentState> moments);

  const AdamW& optimizer() const noexcept { return optimizer_; }
  const Split& split() const noexcept { return split_; }
  const StagePlan& plan() const noexcept { return plan_; }
  const std::vector<HistoryRow>& history() const noexcept { return state_.history; }
  RunSummary summary() const;

  /// Graph input features under the current parameters (eval mode).
  tc::Tensor features();

 private:
  void run_epoch();
  double text_pretrain_epoch(const StageSpec& spec);
  double graph_pretrain_epoch(const StageSpec& spec);
  double joint_epoch(const StageSpec& spec);
  std::size_t steps_per_epoch(Stage stage) const;
  double stage_lr(const StageSpec& spec) const;
  void optimizer_step(const tc::Tensor& loss, const StageSpec& spec, const std::set<std::string>& frozen);
  std::set<std::string> frozen_groups(const StageSpec& spec) const;

  Model& model_;
  const Dataset& data_;
  TrainConfig config_;
  StagePlan plan_;
  Split split_;
  tc::ParamList params_;
  AdamW optimizer_;
  TrainerState state_;
  std::mt19937_64 rng_;
  tc::Tensor features_;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  RunSummary summary;
  Split split;
};

/// Builds the plan from `config`, trains `model` and returns its history.
TrainResult run_stage_plan(Model& model, const Dataset& data, const TrainConfig& config, std::uint64_t seed);

/// Seed of the model-initialisation stream for a run seed.
std::uint64_t init_seed(std::uint64_t seed) noexcept;

}  // namespace dghif::train
