#include "dghif/trainpipe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dghif/common/errors.hpp"
#include "dghif/common/seed.hpp"
#include "dghif/tensorcore/ops.hpp"
#include "dghif/textenc/mlm.hpp"

namespace dghif::train {

using tc::Tensor;

namespace {

constexpr std::uint64_t kSplitStream = 20;
constexpr std::uint64_t kInitStream = 21;
constexpr std::uint64_t kTrainStream = 22;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::string format_optional(const std::optional<double>& v) { return v ? fmt::format("{:.8f}", *v) : std::string(); }

std::uint64_t group_hash(const tc::ParamList& params, const std::set<std::string>& groups) {
  tc::ParamList subset;
  for (const auto& p : params) {
    if (groups.contains(p.group)) subset.push_back(p);
  }
  return tc::hash_values(subset);
}

std::string serialize(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

}  // namespace

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::TextPretrain: return "text_pretrain";
    case Stage::GraphPretrain: return "graph_pretrain";
    case Stage::Joint: return "joint";
  }
  return "unknown";
}

std::uint64_t init_seed(std::uint64_t seed) noexcept { return derive_seed(seed, kInitStream); }

void StagePlan::validate() const {
  if (stages.empty() || stages.back().stage != Stage::Joint) throw ConfigError("stage plan must end with Joint");
  int last = -1;
  for (const auto& s : stages) {
    int order = static_cast<int>(s.stage);
    if (order <= last) throw ConfigError("stage plan stages must be unique and ordered text, graph, joint");
    last = order;
    if (s.epochs == 0) throw ConfigError(fmt::format("stage {} has zero epochs", to_string(s.stage)));
    if (!(s.lr > 0.0) || !(s.lr_min >= 0.0)) throw ConfigError("stage learning rates must be positive");
    if (!(s.warmup_frac >= 0.0 && s.warmup_frac < 1.0)) throw ConfigError("warmup_frac must lie in [0, 1)");
  }
}

bool StagePlan::has(Stage stage) const {
  return std::any_of(stages.begin(), stages.end(), [&](const StageSpec& s) { return s.stage == stage; });
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) throw ConfigError(fmt::format("train.{}: {}", key, why));
  };
  require(batch_size > 0, "batch_size", "must be positive");
  require(joint_epochs > 0, "joint_epochs", "must be positive");
  require(pretrain_lr > 0.0, "pretrain_lr", "must be positive");
  require(lr > 0.0, "lr", "must be positive");
  require(lr_min >= 0.0 && lr_min <= lr, "lr_min", "must lie in [0, lr]");
  require(warmup_frac >= 0.0 && warmup_frac < 1.0, "warmup_frac", "must lie in [0, 1)");
  require(text_lr_multiplier > 0.0, "text_lr_multiplier", "must be positive");
  require(val_fraction > 0.0 && val_fraction < 1.0, "val_fraction", "must lie in (0, 1)");
  require(threshold > 0.0 && threshold < 1.0, "threshold", "must lie in (0, 1)");
  require(mask_rate > 0.0 && mask_rate < 1.0, "mask_rate", "must lie in (0, 1)");
  require(edge_batch > 0, "edge_batch", "must be positive");
  require(adamw.weight_decay >= 0.0, "weight_decay", "must be non-negative");
  require(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(adamw.beta2 >= 0.0 && adamw.beta2 < 1.0, "beta2", "must lie in [0, 1)");
  require(adamw.eps > 0.0, "eps", "must be positive");
  require(lambda0 >= 0.0, "lambda0", "must be non-negative");
}

StagePlan make_plan(const TrainConfig& c, const ModelConfig& model) {
  c.validate();
  StagePlan plan;
  if (!c.skip_text_pretrain && model.uses_text() && c.text_pretrain_epochs > 0) {
    plan.stages.push_back({Stage::TextPretrain, c.text_pretrain_epochs, c.pretrain_lr, c.lr_min, c.warmup_frac,
                           {"pool", "graph", "fusion", "head", "lambda"}, {}, 0});
  }
  if (!c.skip_graph_pretrain && model.uses_graph() && c.graph_pretrain_epochs > 0) {
    plan.stages.push_back({Stage::GraphPretrain, c.graph_pretrain_epochs, c.pretrain_lr, c.lr_min, c.warmup_frac,
                           {"text", "pool", "fusion", "head", "lambda"}, {}, 0});
  }
  plan.stages.push_back({Stage::Joint, c.joint_epochs, c.lr, c.lr_min, c.warmup_frac, {},
                         {{"text", c.text_lr_multiplier}}, c.burn_in_epochs});
  plan.validate();
  return plan;
}

Split stratified_split(std::span<const int> labels, double val_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, kSplitStream));
  Split split;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(members.size())));
    split.val.insert(split.val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  if (split.train.empty() || split.val.empty()) throw DataError("stratified_split: a side of the split is empty");
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

void write_history(std::ostream& out, const std::vector<HistoryRow>& rows) {
  out << "epoch,stage,train_loss,val_F1,val_precision,val_recall,metaphor_acc,lambda_eff,mean_gate\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.8f},{},{},{},{},{},{}\n", r.epoch, to_string(r.stage), r.train_loss,
                       format_optional(r.val_f1), format_optional(r.val_precision), format_optional(r.val_recall),
                       format_optional(r.metaphor_acc), format_optional(r.lambda_eff), format_optional(r.mean_gate));
  }
}

Trainer::Trainer(Model& model, const Dataset& data, TrainConfig config, StagePlan plan, std::uint64_t seed)
    : model_(model),
      data_(data),
      config_(std::move(config)),
      plan_(std::move(plan)),
      split_(stratified_split(data.labels, config_.val_fraction, seed)),
      params_(model.parameters()),
      optimizer_(params_, config_.adamw),
      rng_(derive_seed(seed, kTrainStream)) {
  data_.validate();
  config_.validate();
  plan_.validate();
  if (model_.lambda.mode == LambdaMode::Cosine) {
    model_.lambda.total_steps = plan_.stages.back().epochs * steps_per_epoch(Stage::Joint);
  }
}

std::size_t Trainer::steps_per_epoch(Stage stage) const {
  switch (stage) {
    case Stage::TextPretrain: return ceil_div(data_.posts.size(), config_.batch_size);
    case Stage::GraphPretrain: return std::max<std::size_t>(1, ceil_div(data_.graph->linked_pairs().size(), config_.edge_batch));
    case Stage::Joint: return ceil_div(split_.train.size(), config_.batch_size);
  }
  return 1;
}

double Trainer::stage_lr(const StageSpec& spec) const {
  std::size_t total = spec.epochs * steps_per_epoch(spec.stage);
  return lr_schedule(std::min(state_.stage_step + 1, total), total, spec.lr, spec.lr_min, spec.warmup_frac);
}

std::set<std::string> Trainer::frozen_groups(const StageSpec& spec) const {
  std::set<std::string> frozen = spec.frozen;
  if (spec.stage == Stage::Joint && state_.stage_epoch < spec.burn_in_epochs) frozen.insert("text");
  return frozen;
}

void Trainer::optimizer_step(const Tensor& loss, const StageSpec& spec, const std::set<std::string>& frozen) {
  tc::backward(loss);
  optimizer_.step(stage_lr(spec), frozen, spec.group_lr);
  tc::zero_grads(params_);
  ++state_.stage_step;
}

Tensor Trainer::features() {
  if (!features_.defined() && model_.config.uses_graph()) {
    tc::NoGradScope no_grad;
    std::mt19937_64 unused(0);
    features_ = node_features(model_, data_, false, unused);
  }
  return features_;
}

double Trainer::text_pretrain_epoch(const StageSpec& spec) {
  std::vector<std::size_t> order(data_.posts.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  const auto frozen = frozen_groups(spec);
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    std::vector<text::TokenSequence> batch;
    for (std::size_t i = begin; i < std::min(order.size(), begin + config_.batch_size); ++i) {
      batch.push_back(data_.posts[order[i]]);
    }
    tc::Tape tape;
    tc::TapeScope scope(tape);
    Tensor loss = text::mlm_pretrain_step(batch, model_.text, config_.mask_rate, rng_);
    total += loss.item();
    ++steps;
    if (loss.tape_id() < 0) {
      ++state_.stage_step;
      continue;
    }
    optimizer_step(loss, spec, frozen);
  }
  features_ = {};
  return total / static_cast<double>(std::max<std::size_t>(steps, 1));
}

double Trainer::graph_pretrain_epoch(const StageSpec& spec) {
  Tensor feats = features();
  const auto frozen = frozen_groups(spec);
  const double rate = model_.config.encoder.dropout;
  double total = 0.0;
  const std::size_t steps = steps_per_epoch(Stage::GraphPretrain);
  for (std::size_t s = 0; s < steps; ++s) {
    tc::Tape tape;
    tc::TapeScope scope(tape);
    graph::PairBatch pairs = graph::sample_edge_pairs(*data_.graph, config_.edge_batch, rng_);
    Tensor input = rate > 0.0 ? tc::dropout(feats, rate, true, rng_) : feats;
    Tensor loss = graph::edge_prediction_step(*data_.graph, input, model_.gnn, pairs);
    total += loss.item();
    optimizer_step(loss, spec, frozen);
  }
  return total / static_cast<double>(steps);
}

double Trainer::joint_epoch(const StageSpec& spec) {
  Tensor feats = features();
  std::vector<std::size_t> order = split_.train;
  std::shuffle(order.begin(), order.end(), rng_);
  const auto frozen = frozen_groups(spec);
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    std::span<const std::size_t> batch(order.data() + begin, std::min(config_.batch_size, order.size() - begin));
    tc::Tape tape;
    tc::TapeScope scope(tape);
    ForwardOutput out = forward(model_, data_, batch, feats, true, rng_);
    std::vector<double> labels = labels_as_double(data_, batch);
    Tensor loss = risk_loss(out.logits, labels);
    if (model_.config.uses_graph()) {
      graph::PairBatch pairs = graph::sample_edge_pairs(*data_.graph, config_.edge_batch, rng_);
      Tensor l_rel = graph::edge_prediction_loss(out.graph_embeddings, pairs);
      loss = joint_loss(loss, l_rel, model_.lambda, state_.stage_step);
    }
    total += loss.item();
    ++steps;
    optimizer_step(loss, spec, frozen);
  }
  features_ = {};
  return total / static_cast<double>(std::max<std::size_t>(steps, 1));
}

void Trainer::run_epoch() {
  const StageSpec& spec = plan_.stages.at(state_.stage_index);
  const auto frozen = frozen_groups(spec);
  const std::uint64_t frozen_before = group_hash(params_, frozen);

  HistoryRow row;
  row.stage = spec.stage;
  switch (spec.stage) {
    case Stage::TextPretrain: row.train_loss = text_pretrain_epoch(spec); break;
    case Stage::GraphPretrain: row.train_loss = graph_pretrain_epoch(spec); break;
    case Stage::Joint: row.train_loss = joint_epoch(spec); break;
  }
  if (group_hash(params_, frozen) != frozen_before) {
    throw StateError(fmt::format("frozen parameters changed during {} epoch {}", to_string(spec.stage),
                                 state_.stage_epoch + 1));
  }
  ++state_.stage_epoch;
  ++state_.epoch;
  row.epoch = state_.epoch;

  bool stop = state_.stage_epoch >= spec.epochs;
  if (spec.stage == Stage::Joint) {
    Scores s = score_users(model_, data_, split_.val, features());
    std::vector<int> labels;
    std::vector<bool> flags;
    for (std::size_t u : split_.val) {
      labels.push_back(data_.labels[u]);
      flags.push_back(data_.metaphor[u]);
    }
    ClassificationMetrics m = classification_metrics(s.risk, labels, config_.threshold, flags);
    row.val_f1 = m.f1;
    row.val_precision = m.precision;
    row.val_recall = m.recall;
    row.metaphor_acc = m.metaphor_acc;
    if (model_.config.uses_graph()) row.lambda_eff = model_.lambda.value(state_.stage_step);
    double gate_sum = 0.0;
    std::size_t gate_n = 0;
    for (double g : s.gate_mass) {
      if (!std::isnan(g)) {
        gate_sum += g;
        ++gate_n;
      }
    }
    if (gate_n > 0) row.mean_gate = gate_sum / static_cast<double>(gate_n);

    EarlyStopping es(config_.patience);
    es.restore(state_.best_f1, state_.best_epoch, state_.since_best);
    bool early = es.update(state_.stage_epoch, m.f1);
    state_.best_f1 = es.best();
    state_.best_epoch = es.best_epoch();
    state_.since_best = es.since_best();
    if (early && !stop) spdlog::debug("early stop after joint epoch {} (best {})", state_.stage_epoch, state_.best_epoch);
    stop = stop || early;
  }
  state_.history.push_back(row);
  spdlog::debug("epoch {} [{}] loss {:.5f}{}", row.epoch, to_string(row.stage), row.train_loss,
                row.val_f1 ? fmt::format(" val_F1 {:.4f}", *row.val_f1) : std::string());

  if (stop) {
    if (state_.stage_index + 1 == plan_.stages.size()) {
      state_.finished = true;
    } else {
      ++state_.stage_index;
      state_.stage_epoch = 0;
      state_.stage_step = 0;
      optimizer_.reset();
    }
  }
}

void Trainer::run(std::size_t max_epochs, const std::function<void(const Trainer&)>& on_epoch) {
  for (std::size_t n = 0; n < max_epochs && !state_.finished; ++n) {
    run_epoch();
    if (on_epoch) on_epoch(*this);
  }
}

TrainerState Trainer::state() const {
  TrainerState s = state_;
  s.rng = serialize(rng_);
  return s;
}

void Trainer::restore(const TrainerState& state, std::vector<MomentState> moments) {
  if (state.stage_index >= plan_.stages.size()) throw StateError("trainer state refers to a stage outside the plan");
  if (moments.size() != optimizer_.state().size()) throw StateError("optimizer state does not match the parameters");
  for (std::size_t i = 0; i < moments.size(); ++i) {
    std::size_t n = params_[i].tensor.numel();
    if (moments[i].m.size() != n || moments[i].v.size() != n) {
      throw StateError(fmt::format("optimizer moments for {} have the wrong size", params_[i].name));
    }
  }
  state_ = state;
  std::istringstream in(state.rng);
  in >> rng_;
  if (!in) throw StateError("cannot parse the saved RNG state");
  optimizer_.state() = std::move(moments);
  features_ = {};
}

RunSummary Trainer::summary() const {
  RunSummary s;
  s.convergence_epoch = state_.best_epoch;
  s.best_val_f1 = std::max(state_.best_f1, 0.0);
  std::size_t joint_epoch = 0;
  for (const auto& row : state_.history) {
    if (row.stage != Stage::Joint) continue;
    ++joint_epoch;
    if (joint_epoch == state_.best_epoch) s.metaphor_acc = row.metaphor_acc;
    s.final_val_f1 = row.val_f1.value_or(0.0);
  }
  s.joint_epochs_run = joint_epoch;
  return s;
}

TrainResult run_stage_plan(Model& model, const Dataset& data, const TrainConfig& config, std::uint64_t seed) {
  Trainer trainer(model, data, config, make_plan(config, model.config), seed);
  trainer.run();
  return {trainer.history(), trainer.summary(), trainer.split()};
}

}  // namespace dghif::train
