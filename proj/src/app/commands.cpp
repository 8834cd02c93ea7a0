#include "dghif/app/commands.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "dghif/app/experiment.hpp"
#include "dghif/common/errors.hpp"
#include "dghif/synthbench/corpus_io.hpp"
#include "dghif/tensorcore/grad_suite.hpp"
#include "dghif/trainpipe/grad_probe.hpp"
#include "dghif/trainpipe/metrics.hpp"

namespace dghif::app {

namespace {

std::ofstream open_report(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  return out;
}

void write_history_file(const fs::path& path, const std::vector<train::HistoryRow>& rows) {
  auto out = open_report(path);
  train::write_history(out, rows);
}

std::string format_score(double v) { return fmt::format("{:.9f}", v); }

}  // namespace

synth::SynthCorpus resolve_corpus(const ExperimentConfig& config, const std::optional<fs::path>& dir,
                                  std::uint64_t seed) {
  if (dir) return synth::read_corpus(*dir);
  synth::SynthConfig sc = config.synth;
  sc.seed = seed;
  return synth::generate(sc);
}

void cmd_generate(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out) {
  synth::write_corpus(out, resolve_corpus(config, std::nullopt, seed));
}

TrainOutcome cmd_train(const ExperimentConfig& config, const TrainOptions& options) {
  std::unique_ptr<TrainSession> session;
  if (options.resume) {
    Checkpoint ckpt = load_checkpoint(*options.resume);
    session = resume_session(config, resolve_corpus(config, options.corpus, ckpt.seed), ckpt, options.force);
    spdlog::info("resumed from {} at epoch {} ({})", options.resume->string(), ckpt.trainer.epoch, ckpt.stage);
  } else {
    session = open_session(config, resolve_corpus(config, options.corpus, options.seed), options.seed);
  }

  TrainOutcome outcome;
  outcome.checkpoint = options.out / "checkpoint.bin";
  outcome.history = options.out / "history.csv";
  fs::create_directories(options.out);
  {
    auto cfg = open_report(options.out / "config.cfg");
    cfg << serialize_config(config);
  }
  auto on_epoch = [&](const train::Trainer&) { save_checkpoint(outcome.checkpoint, session->checkpoint()); };
  session->trainer->run(options.stop_after_epochs.value_or(std::numeric_limits<std::size_t>::max()), on_epoch);
  save_checkpoint(outcome.checkpoint, session->checkpoint());
  write_history_file(outcome.history, session->trainer->history());
  outcome.finished = session->trainer->finished();
  outcome.summary = session->trainer->summary();
  return outcome;
}

std::vector<AblationRow> cmd_ablate(const ExperimentConfig& config, const std::string& grid,
                                    const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  const auto variants = builtin_grid(grid);
  auto results = run_grid(config, variants, seeds, config.run.workers, false,
                          [](const Variant& v, std::uint64_t seed, const VariantRun& r) {
                            spdlog::info("{} seed {}: best val F1 {:.4f} at joint epoch {}", v.name, seed,
                                         r.result.summary.best_val_f1, r.result.summary.convergence_epoch);
                          });
  auto rows = ablation_rows(variants, results);
  {
    auto f = open_report(out / fmt::format("ablation_{}.csv", grid));
    write_ablation_csv(f, rows);
  }
  {
    auto f = open_report(out / fmt::format("seeds_{}.csv", grid));
    write_seed_csv(f, variants, seeds, results, false);
  }
  {
    auto f = open_report(out / fmt::format("latency_{}.csv", grid));
    write_latency_csv(f, rows);
  }
  return rows;
}

std::vector<EfficiencyRow> cmd_benchmark(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds,
                                         const fs::path& out) {
  const auto variants = builtin_grid("table4");
  ExperimentConfig base = config;
  base.run.latency_samples = 0;
  auto results = run_grid(base, variants, seeds, config.run.workers, true,
                          [](const Variant& v, std::uint64_t seed, const VariantRun& r) {
                            spdlog::info("{} seed {}: delay {:.3f}", v.name, seed, r.efficiency->delay);
                          });
  auto rows = efficiency_rows(variants, results);
  {
    auto f = open_report(out / "efficiency.csv");
    write_efficiency_csv(f, rows);
  }
  {
    auto f = open_report(out / "efficiency_seeds.csv");
    write_seed_csv(f, variants, seeds, results, true);
  }
  return rows;
}

ScoreOutcome cmd_score(const fs::path& checkpoint, const std::optional<fs::path>& corpus, const fs::path& out_csv) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const ExperimentConfig config = ckpt.config();
  ScoringModel m = load_for_scoring(ckpt, resolve_corpus(config, corpus, ckpt.seed));
  std::vector<std::size_t> users(m.data.users());
  for (std::size_t u = 0; u < users.size(); ++u) users[u] = u;
  const train::Scores scores = train::score_users(m.model, m.data, users, m.features);

  ScoreOutcome outcome;
  outcome.users = users.size();
  auto out = open_report(out_csv);
  out << "user_id,risk_score,mean_gate,label\n";
  for (std::size_t u : users) {
    std::string gate;
    if (scores.bypassed[u]) {
      gate = "bypassed";
      ++outcome.bypassed;
    } else if (!std::isnan(scores.gate_mass[u])) {
      gate = format_score(scores.gate_mass[u]);
    }
    fmt::print(out, "{},{},{},{}\n", u, format_score(scores.risk[u]), gate, m.data.labels[u]);
  }

  const train::Split split = train::stratified_split(m.data.labels, config.train.val_fraction, ckpt.seed);
  std::vector<double> val_scores;
  std::vector<int> val_labels;
  for (std::size_t u : split.val) {
    val_scores.push_back(scores.risk[u]);
    val_labels.push_back(m.data.labels[u]);
  }
  outcome.val_f1 = train::classification_metrics(val_scores, val_labels, config.train.threshold).f1;
  return outcome;
}

bool GradCheckSummary::passed() const {
  for (const auto& [name, report] : reports) {
    if (!report.passed()) return false;
  }
  return !reports.empty();
}

GradCheckSummary cmd_grad_check(std::size_t points, std::uint64_t seed) {
  GradCheckSummary summary;
  const auto& cases = tc::primitive_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    summary.reports.emplace_back(cases[i].name, tc::check_primitive(cases[i], points, seed + i));
  }
  const std::pair<train::LambdaMode, const char*> modes[] = {
      {train::LambdaMode::Fixed, "fixed"}, {train::LambdaMode::Cosine, "cosine"}, {train::LambdaMode::Learned, "learned"}};
  for (const auto& [mode, name] : modes) {
    summary.reports.emplace_back(fmt::format("joint_loss[{}]", name), train::joint_loss_grad_check(mode, seed));
  }
  return summary;
}

}  // namespace dghif::app
