#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dghif/app/commands.hpp"
#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/precision.hpp"

namespace {

using namespace dghif;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c, bool with_seeds) {
  cmd->add_option("--config", c.config_path, "Experiment config file (defaults apply when omitted)");
  cmd->add_option("--set", c.overrides, "Override a config key: section.key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Run seed");
  if (with_seeds) cmd->add_option("--seeds", c.seeds, "Comma-separated seed list (overrides run.seeds)");
  cmd->add_option("--out", c.out, "Output directory");
}

app::ExperimentConfig build_config(const Common& c) {
  app::ExperimentConfig cfg = c.config_path.empty() ? app::ExperimentConfig{} : app::load_config(c.config_path);
  for (const auto& o : c.overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not key=value", o));
    app::set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (!c.seeds.empty()) app::set_config_value(cfg, "run.seeds", c.seeds);
  cfg.validate();
  return cfg;
}

std::vector<std::uint64_t> seed_list(const Common& c, const app::ExperimentConfig& cfg) {
  if (c.seed && c.seeds.empty()) return {*c.seed};
  return cfg.run.seeds;
}

void print_gradcheck(const app::GradCheckSummary& s) {
  for (const auto& [name, report] : s.reports) {
    fmt::print("{:<28} max_rel_err {:.3e}  {}\n", name, report.max_rel_error(), report.passed() ? "ok" : "FAIL");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Multimodal risk detection over text and interaction graphs"};
  cli.require_subcommand(1);
  bool verbose = false;
  cli.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  Common gen_c, train_c, ablate_c, bench_c, score_c;
  auto* gen = cli.add_subcommand("generate", "Write a synthetic corpus");
  add_common(gen, gen_c, false);

  auto* train = cli.add_subcommand("train", "Train a model and write checkpoint.bin and history.csv");
  add_common(train, train_c, false);
  std::string train_corpus, resume;
  bool force = false;
  std::optional<std::size_t> stop_after;
  train->add_option("--corpus", train_corpus, "Corpus directory (generated from the config when omitted)");
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_flag("--force", force, "Resume even when the config differs from the checkpoint's");
  train->add_option("--stop-after-epochs", stop_after)->group("");

  auto* ablate = cli.add_subcommand("ablate", "Run an ablation grid over the seed list");
  add_common(ablate, ablate_c, true);
  std::string grid = "table1";
  ablate->add_option("--grid", grid, "Grid name: table1, table2, table4 or table5");

  auto* bench = cli.add_subcommand("benchmark", "Efficiency report of the normalisation variants");
  add_common(bench, bench_c, true);

  auto* score = cli.add_subcommand("score", "Score every user of a corpus with a checkpoint");
  std::string ckpt_path, score_corpus, score_out = "scores.csv";
  score->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();
  score->add_option("--corpus", score_corpus, "Corpus directory (the checkpoint's own corpus when omitted)");
  score->add_option("--out", score_out, "Output CSV");

  auto* grad = cli.add_subcommand("grad-check", "Finite-difference gradient checks");
  std::size_t points = 5;
  std::uint64_t grad_seed = 1;
  grad->add_option("--points", points, "Random points per primitive");
  grad->add_option("--seed", grad_seed, "Seed for the random points");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    tc::set_precision(tc::precision_from_env());
    if (*gen) {
      auto cfg = build_config(gen_c);
      std::uint64_t seed = gen_c.seed.value_or(cfg.synth.seed);
      app::cmd_generate(cfg, seed, gen_c.out);
      fmt::print("corpus written to {}\n", gen_c.out);
    } else if (*train) {
      auto cfg = build_config(train_c);
      app::TrainOptions opts;
      opts.seed = train_c.seed.value_or(cfg.run.seeds.front());
      if (!train_corpus.empty()) opts.corpus = train_corpus;
      opts.out = train_c.out;
      if (!resume.empty()) opts.resume = resume;
      opts.force = force;
      opts.stop_after_epochs = stop_after;
      auto outcome = app::cmd_train(cfg, opts);
      fmt::print("{} best val F1 {:.4f} at joint epoch {}; final val F1 {:.4f}\n",
                 outcome.finished ? "finished:" : "stopped:", outcome.summary.best_val_f1,
                 outcome.summary.convergence_epoch, outcome.summary.final_val_f1);
      fmt::print("checkpoint {}\nhistory {}\n", outcome.checkpoint.string(), outcome.history.string());
    } else if (*ablate) {
      auto cfg = build_config(ablate_c);
      auto rows = app::cmd_ablate(cfg, grid, seed_list(ablate_c, cfg), ablate_c.out);
      for (const auto& r : rows) {
        fmt::print("{:<20} F1 {:.4f} ± {:.4f}  convergence {:.1f}  latency {:.3f} ms\n", r.name, r.f1.mean, r.f1.std,
                   r.convergence_epoch.mean, r.latency_ms.mean);
      }
    } else if (*bench) {
      auto cfg = build_config(bench_c);
      auto rows = app::cmd_benchmark(cfg, seed_list(bench_c, cfg), bench_c.out);
      for (const auto& r : rows) {
        fmt::print("{:<20} delay {:.3f}  sensitivity {:.2f}%  SNR {:.2f} dB\n", r.name, r.delay.mean,
                   r.sensitivity.mean, r.snr.mean);
      }
    } else if (*score) {
      std::optional<fs::path> corpus;
      if (!score_corpus.empty()) corpus = score_corpus;
      auto outcome = app::cmd_score(ckpt_path, corpus, score_out);
      fmt::print("scored {} users ({} bypassed); val F1 {:.6f}\n", outcome.users, outcome.bypassed, outcome.val_f1);
    } else if (*grad) {
      auto summary = app::cmd_grad_check(points, grad_seed);
      print_gradcheck(summary);
      if (!summary.passed()) return kExitRuntime;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
