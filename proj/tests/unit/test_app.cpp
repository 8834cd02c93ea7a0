#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dghif/app/ablation.hpp"
#include "dghif/app/checkpoint.hpp"
#include "dghif/app/commands.hpp"
#include "dghif/app/efficiency.hpp"
#include "dghif/app/experiment.hpp"
#include "dghif/common/errors.hpp"
#include "dghif/synthbench/corpus_io.hpp"
#include "dghif/tensorcore/grad_suite.hpp"
#include "dghif/tensorcore/precision.hpp"
#include "test_util.hpp"

using namespace dghif;
using namespace dghif::app;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.synth.nodes = 60;
  c.synth.min_degree = 2;
  c.synth.max_posts = 2;
  c.synth.min_post_len = 4;
  c.synth.max_post_len = 6;
  c.synth.filler_tokens = 30;
  c.synth.risk_keywords = 6;
  c.synth.metaphor_tokens = 4;
  c.synth.target_tokens = 4;
  c.synth.risk_community_fraction = 0.4;
  c.model.encoder.hidden = 8;
  c.model.encoder.heads = 2;
  c.model.encoder.ffn = 16;
  c.model.encoder.layers = 1;
  c.model.encoder.max_len = 8;
  c.model.graph_hidden = 8;
  c.model.fusion_dim = 8;
  c.model.head_hidden = 8;
  c.train.batch_size = 16;
  c.train.edge_batch = 16;
  c.train.text_pretrain_epochs = 1;
  c.train.graph_pretrain_epochs = 1;
  c.train.joint_epochs = 4;
  c.train.lr = 1e-2;
  c.train.pretrain_lr = 1e-2;
  c.train.val_fraction = 0.25;
  c.run.latency_samples = 5;
  c.run.seeds = {1, 2};
  return c;
}

TrainOptions opts(std::uint64_t seed, fs::path out, std::optional<std::size_t> stop = std::nullopt,
                  std::optional<fs::path> resume = std::nullopt, bool force = false) {
  TrainOptions o;
  o.seed = seed;
  o.out = std::move(out);
  o.stop_after_epochs = stop;
  o.resume = std::move(resume);
  o.force = force;
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           fmt::format("dghif_app_{}_{}", ::testing::UnitTest::GetInstance()->current_test_info()->name(),
                       std::random_device{}());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

// ---- config -------------------------------------------------------------------

TEST(Config, DefaultRoundTripsLosslessly) {
  ExperimentConfig c;
  const std::string text = serialize_config(c);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
  EXPECT_EQ(config_hash(parse_config(text)), config_hash(c));
}

TEST(Config, ModifiedValuesRoundTrip) {
  ExperimentConfig c = tiny_config();
  c.train.lr = 0.1 + 0.2;  // not exactly representable in short decimal
  c.train.lambda_mode = train::LambdaMode::Cosine;
  c.model.norm = graph::NormMode::FixedSqrt;
  c.model.fusion_mode = fusion::FusionMode::Concat;
  c.model.relation_weights = false;
  c.benchmark.transmission = {0.3, 0.2, 0.1, 0.05};
  c.run.seeds = {9, 8, 7};
  ExperimentConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back.train.lr, c.train.lr);
  EXPECT_EQ(back.train.lambda_mode, train::LambdaMode::Cosine);
  EXPECT_EQ(back.model.norm, graph::NormMode::FixedSqrt);
  EXPECT_EQ(back.model.fusion_mode, fusion::FusionMode::Concat);
  EXPECT_FALSE(back.model.relation_weights);
  EXPECT_EQ(back.benchmark.transmission, c.benchmark.transmission);
  EXPECT_EQ(back.run.seeds, c.run.seeds);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, SectionsCommentsAndDefaults) {
  auto c = parse_config("format_version = 1\n# comment\n[train]\nlr = 0.5  # trailing\n\n[model]\nhidden=16\n");
  EXPECT_EQ(c.train.lr, 0.5);
  EXPECT_EQ(c.model.encoder.hidden, 16u);
  EXPECT_EQ(c.train.batch_size, ExperimentConfig{}.train.batch_size);
}

TEST(Config, ErrorsNameTheKey) {
  auto message = [](std::string_view text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("format_version = 1\n[train]\nlrr = 1\n").find("train.lrr"), std::string::npos);
  EXPECT_NE(message("format_version = 1\n[train]\nlr = 1\nlr = 2\n").find("train.lr"), std::string::npos);
  EXPECT_NE(message("format_version = 1\n[train]\nlr = fast\n").find("train.lr"), std::string::npos);
  EXPECT_NE(message("[train]\nlr = 1\n").find("format_version"), std::string::npos);
  EXPECT_NE(message("format_version = 99\n").find("format_version"), std::string::npos);
  EXPECT_NE(message("format_version = 1\n[ablation]\nnorm_mode = cubic\n").find("ablation.norm_mode"),
            std::string::npos);
}

TEST(Config, ValidationRejectsBadValues) {
  ExperimentConfig c;
  set_config_value(c, "synth.exponent", "0.9");
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_config("format_version = 1\n[synth]\nexponent = 0.9\n"), ConfigError);
  ExperimentConfig d;
  set_config_value(d, "run.workers", "0");
  EXPECT_THROW(d.validate(), ConfigError);
  EXPECT_THROW(set_config_value(c, "nope.key", "1"), ConfigError);
}

TEST(Config, EveryKeyIsSerialized) {
  const std::string text = "\n" + serialize_config(ExperimentConfig{});
  for (const auto& key : config_keys()) {
    auto dot = key.find('.');
    std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    EXPECT_NE(text.find("\n" + leaf + " = "), std::string::npos) << key;
  }
}

// ---- ablation helpers ------------------------------------------------------------

TEST(Ablation, BuiltinGridShapes) {
  auto names = [](const std::vector<Variant>& g) {
    std::vector<std::string> out;
    for (const auto& v : g) out.push_back(v.name);
    return out;
  };
  EXPECT_EQ(names(builtin_grid("table1")),
            (std::vector<std::string>{"Full", "-SemanticGuide", "-AdaptNorm", "-GatedFusion"}));
  EXPECT_EQ(names(builtin_grid("table2")), (std::vector<std::string>{"NLP-only", "GNN-only", "Full"}));
  EXPECT_EQ(builtin_grid("table4").size(), 4u);
  EXPECT_EQ(builtin_grid("table5").size(), 4u);
  EXPECT_THROW(builtin_grid("table9"), ConfigError);
}

TEST(Ablation, VariantsSetTheirToggles) {
  const ExperimentConfig base;
  for (const auto& v : builtin_grid("table4")) {
    auto c = apply_variant(base, v);
    if (v.name == "FixedNorm") {
      EXPECT_EQ(c.model.norm, graph::NormMode::FixedSqrt);
      EXPECT_TRUE(c.model.relation_weights);
    } else if (v.name == "LearnedNorm") {
      EXPECT_EQ(c.model.norm, graph::NormMode::Adaptive);
      EXPECT_FALSE(c.model.relation_weights);
    } else if (v.name == "NoRelationWeights") {
      EXPECT_EQ(c.model.norm, graph::NormMode::FixedSqrt);
      EXPECT_FALSE(c.model.relation_weights);
    } else {
      EXPECT_EQ(serialize_config(c), serialize_config(base));
    }
  }
  auto skip_all = apply_variant(base, builtin_grid("table5").back());
  EXPECT_TRUE(skip_all.train.skip_text_pretrain);
  EXPECT_TRUE(skip_all.train.skip_graph_pretrain);
}

TEST(Ablation, UnknownToggleIsTypedError) {
  EXPECT_THROW(apply_variant(ExperimentConfig{}, {"bad", {{"warp_speed", "true"}}}), ConfigError);
  // Only ablation keys may be toggled.
  EXPECT_THROW(apply_variant(ExperimentConfig{}, {"bad", {{"train.lr", "1"}}}), ConfigError);
}

TEST(Ablation, SummarizeMatchesHandComputation) {
  std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  auto s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_NEAR(s.std, std::sqrt(32.0 / 7.0), 1e-12);
  EXPECT_EQ(summarize(std::vector<double>{3.0}).std, 0.0);
}

TEST(Ablation, PairedTestAgainstTableValue) {
  // Differences with mean 1 and sample sd s give t = sqrt(n) / s. For n = 5 the
  // two-sided 5% critical value of Student's t with 4 df is 2.776445.
  const double t_crit = 2.7764451051977987;
  const double s = std::sqrt(5.0) / t_crit;
  // Five differences with mean 1 and sample standard deviation s.
  const double a = s * std::sqrt(4.0 / 2.0);
  std::vector<double> d{1.0 - a, 1.0, 1.0, 1.0, 1.0 + a};
  std::vector<double> base(5, 0.5), x(5);
  for (std::size_t i = 0; i < 5; ++i) x[i] = base[i] + d[i];
  auto r = paired_t_test(x, base);
  EXPECT_NEAR(r.mean_diff, 1.0, 1e-12);
  EXPECT_NEAR(r.t, t_crit, 1e-9);
  EXPECT_NEAR(r.p, 0.05, 1e-9);
  EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}), DataError);
  EXPECT_THROW(paired_t_test(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0}), DataError);
  auto same = paired_t_test(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0});
  EXPECT_EQ(same.p, 1.0);
}

TEST(Ablation, EfficiencyCsvHasFourRowsOfThreeMetrics) {
  std::vector<EfficiencyRow> rows;
  for (const auto& v : builtin_grid("table4")) rows.push_back({v.name, {5.0, 0.0, 1}, {10.0, 0.0, 1}, {3.0, 0.0, 1}});
  std::ostringstream out;
  write_efficiency_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "variant,delay_steps,sensitivity_pct,snr_db");
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
  }
  EXPECT_EQ(n, 4u);
}

// ---- event injection -----------------------------------------------------------

TEST(Efficiency, InjectionIsConsistent) {
  auto cfg = tiny_config();
  cfg.synth.nodes = 200;
  cfg.synth.seed = 4;
  auto corpus = synth::generate(cfg.synth);
  auto events = inject_events(corpus, cfg.benchmark, 4);
  ASSERT_EQ(events.events.size(), 3u);
  EXPECT_TRUE(std::is_sorted(events.touched.begin(), events.touched.end()));
  std::set<std::size_t> touched(events.touched.begin(), events.touched.end());
  for (std::size_t u : events.adopters) {
    EXPECT_TRUE(touched.count(u));
    EXPECT_EQ(events.corpus.users[u].label, 1);
  }
  for (const auto& e : events.events) {
    for (std::size_t s : e.seeds) {
      EXPECT_NE(std::find(events.adopters.begin(), events.adopters.end(), s), events.adopters.end());
    }
  }
  // Non-adopters keep their label and posts.
  std::set<std::size_t> adopted(events.adopters.begin(), events.adopters.end());
  for (std::size_t u = 0; u < corpus.users.size(); ++u) {
    if (!adopted.count(u)) {
      EXPECT_EQ(events.corpus.users[u].label, corpus.users[u].label);
    }
  }
  EXPECT_EQ(events.corpus.posts.size(), corpus.posts.size() + adopted.size());
  auto again = inject_events(corpus, cfg.benchmark, 4);
  EXPECT_EQ(again.adopters, events.adopters);
}

TEST(Efficiency, TotalDegreesMatchEdgeCount) {
  auto cfg = tiny_config();
  auto g = synth::build_corpus_graph(synth::generate(cfg.synth));
  auto deg = total_degrees(g);
  std::size_t sum = 0, edges = 0;
  for (auto d : deg) sum += d;
  for (std::size_t r = 0; r < g.relation_count(); ++r) edges += g.edges(r).size();
  EXPECT_EQ(sum, 2 * edges);
}

// ---- checkpoint ----------------------------------------------------------------

class CheckpointTest : public TempDir {};

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  auto cfg = tiny_config();
  auto session = open_session(cfg, resolve_corpus(cfg, std::nullopt, 1), 1);
  session->trainer->run(3);
  save_checkpoint(dir_ / "a.bin", session->checkpoint());
  save_checkpoint(dir_ / "b.bin", load_checkpoint(dir_ / "a.bin"));
  EXPECT_EQ(slurp(dir_ / "a.bin"), slurp(dir_ / "b.bin"));
  auto ckpt = load_checkpoint(dir_ / "a.bin");
  EXPECT_EQ(ckpt.stage, "joint");
  EXPECT_EQ(ckpt.trainer.epoch, 3u);
  EXPECT_EQ(ckpt.config_hash, config_hash(cfg));
}

TEST_F(CheckpointTest, RestoredModelGivesIdenticalForwardOutputs) {
  tc::PrecisionScope f64(tc::Precision::f64);
  auto cfg = tiny_config();
  auto session = open_session(cfg, resolve_corpus(cfg, std::nullopt, 2), 2);
  session->trainer->run(4);
  save_checkpoint(dir_ / "c.bin", session->checkpoint());
  ScoringModel restored = load_for_scoring(load_checkpoint(dir_ / "c.bin"), session->corpus);

  const std::vector<std::size_t> probe{0, 3, 7, 11, 19};
  auto features = session->trainer->features();
  auto a = train::score_users(session->model, session->data, probe, features);
  auto b = train::score_users(restored.model, restored.data, probe, restored.features);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    EXPECT_EQ(a.risk[i], b.risk[i]);
    EXPECT_TRUE(a.gate_mass[i] == b.gate_mass[i] || (std::isnan(a.gate_mass[i]) && std::isnan(b.gate_mass[i])));
  }
}

TEST_F(CheckpointTest, CorruptFilesAreRejected) {
  auto cfg = tiny_config();
  auto session = open_session(cfg, resolve_corpus(cfg, std::nullopt, 1), 1);
  std::string bytes = encode_checkpoint(session->checkpoint());
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), DataError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), DataError);
  std::string bad_version = bytes;
  bad_version[8] = 7;
  EXPECT_THROW(decode_checkpoint(bad_version), DataError);
  EXPECT_THROW(load_checkpoint(dir_ / "missing.bin"), DataError);
}

TEST_F(CheckpointTest, ConfigMismatchNeedsForce) {
  auto cfg = tiny_config();
  auto session = open_session(cfg, resolve_corpus(cfg, std::nullopt, 1), 1);
  auto ckpt = session->checkpoint();
  auto other = cfg;
  other.train.patience = 9;
  EXPECT_THROW(check_config(ckpt, other, false), ConfigError);
  EXPECT_NO_THROW(check_config(ckpt, other, true));
  EXPECT_NO_THROW(check_config(ckpt, cfg, false));
}

TEST_F(CheckpointTest, CorpusWithOtherVocabularyIsRejected) {
  auto cfg = tiny_config();
  auto session = open_session(cfg, resolve_corpus(cfg, std::nullopt, 1), 1);
  auto ckpt = session->checkpoint();
  auto other = cfg;
  other.synth.filler_tokens = 50;
  EXPECT_THROW(load_for_scoring(ckpt, resolve_corpus(other, std::nullopt, 1)), DataError);
}

// ---- commands ------------------------------------------------------------------

class CommandTest : public TempDir {};

TEST_F(CommandTest, GenerateIsDeterministicAndCreatesDirectories) {
  auto cfg = tiny_config();
  cmd_generate(cfg, 5, dir_ / "a" / "nested");
  cmd_generate(cfg, 5, dir_ / "b");
  for (const char* f : {"users.csv", "posts.jsonl", "interactions.tsv", "vocab.txt", "manifest.json"}) {
    ASSERT_TRUE(fs::exists(dir_ / "b" / f)) << f;
    EXPECT_EQ(synth::file_hash(dir_ / "a" / "nested" / f), synth::file_hash(dir_ / "b" / f)) << f;
  }
  auto corpus = resolve_corpus(cfg, dir_ / "b", 999);
  EXPECT_EQ(corpus.users.size(), cfg.synth.nodes);
}

TEST_F(CommandTest, TrainIsReproducibleByteForByte) {
  auto cfg = tiny_config();
  cmd_train(cfg, opts(3, dir_ / "a"));
  cmd_train(cfg, opts(3, dir_ / "b"));
  for (const char* f : {"history.csv", "checkpoint.bin", "config.cfg"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(CommandTest, ResumedTrainingMatchesUninterrupted) {
  auto cfg = tiny_config();
  auto full = cmd_train(cfg, opts(4, dir_ / "full"));
  ASSERT_TRUE(full.finished);
  for (std::size_t cut : {1u, 2u, 4u}) {
    auto out = dir_ / fmt::format("cut{}", cut);
    auto part = cmd_train(cfg, opts(4, out, cut));
    EXPECT_FALSE(part.finished);
    auto resumed = cmd_train(cfg, opts(99, out, std::nullopt, out / "checkpoint.bin"));
    EXPECT_TRUE(resumed.finished);
    EXPECT_EQ(resumed.summary.best_val_f1, full.summary.best_val_f1);
    EXPECT_EQ(resumed.summary.final_val_f1, full.summary.final_val_f1);
    EXPECT_EQ(resumed.summary.convergence_epoch, full.summary.convergence_epoch);
    EXPECT_EQ(slurp(out / "history.csv"), slurp(dir_ / "full" / "history.csv"));
    EXPECT_EQ(slurp(out / "checkpoint.bin"), slurp(dir_ / "full" / "checkpoint.bin"));
  }
}

TEST_F(CommandTest, ResumeWithChangedConfigFailsUnlessForced) {
  auto cfg = tiny_config();
  cmd_train(cfg, opts(1, dir_, 1));
  auto changed = cfg;
  changed.train.joint_epochs = 5;
  EXPECT_THROW(cmd_train(changed, opts(1, dir_, std::nullopt, dir_ / "checkpoint.bin")), ConfigError);
  EXPECT_NO_THROW(cmd_train(changed, opts(1, dir_, std::nullopt, dir_ / "checkpoint.bin", true)));
}

TEST_F(CommandTest, ScoreReproducesFinalValidationF1) {
  tc::PrecisionScope f64(tc::Precision::f64);
  auto cfg = tiny_config();
  auto trained = cmd_train(cfg, opts(2, dir_));
  auto scored = cmd_score(trained.checkpoint, std::nullopt, dir_ / "scores.csv");
  EXPECT_NEAR(scored.val_f1, trained.summary.final_val_f1, 1e-6);
  EXPECT_EQ(scored.users, cfg.synth.nodes);

  std::ifstream in(dir_ / "scores.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "user_id,risk_score,mean_gate,label");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, cfg.synth.nodes);

  auto again = cmd_score(trained.checkpoint, std::nullopt, dir_ / "scores2.csv");
  EXPECT_EQ(slurp(dir_ / "scores.csv"), slurp(dir_ / "scores2.csv"));
  EXPECT_EQ(again.val_f1, scored.val_f1);
}

TEST_F(CommandTest, ColdStartUsersAreReportedBypassed) {
  auto cfg = tiny_config();
  cfg.synth.min_degree = 1;
  auto trained = cmd_train(cfg, opts(1, dir_, 0));
  // Strip every interaction of user 0 and score that corpus.
  auto corpus = resolve_corpus(cfg, std::nullopt, 1);
  std::erase_if(corpus.interactions, [](const auto& e) { return e.actor == 0 || e.target == 0; });
  synth::write_corpus(dir_ / "corpus", corpus);
  auto scored = cmd_score(trained.checkpoint, dir_ / "corpus", dir_ / "scores.csv");
  EXPECT_GE(scored.bypassed, 1u);
  std::ifstream in(dir_ / "scores.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_NE(first.find(",bypassed,"), std::string::npos) << first;
}

TEST_F(CommandTest, AblateWritesOneRowPerVariantAndIsReproducible) {
  auto cfg = tiny_config();
  cfg.train.joint_epochs = 2;
  auto rows = cmd_ablate(cfg, "table2", {1, 2}, dir_ / "a");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[2].vs_full.has_value());
  EXPECT_TRUE(rows[0].vs_full.has_value());
  cfg.run.workers = 2;
  cmd_ablate(cfg, "table2", {1, 2}, dir_ / "b");
  EXPECT_EQ(slurp(dir_ / "a" / "ablation_table2.csv"), slurp(dir_ / "b" / "ablation_table2.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "seeds_table2.csv"), slurp(dir_ / "b" / "seeds_table2.csv"));
  std::ifstream in(dir_ / "a" / "ablation_table2.csv");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 4u);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "latency_table2.csv"));
  EXPECT_THROW(cmd_ablate(cfg, "nope", {1}, dir_ / "c"), ConfigError);
}

TEST_F(CommandTest, BenchmarkWritesTheEfficiencyTable) {
  auto cfg = tiny_config();
  cfg.synth.nodes = 120;
  cfg.train.joint_epochs = 2;
  auto rows = cmd_benchmark(cfg, {1}, dir_);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_GE(r.delay.mean, 0.0);
    EXPECT_LE(r.delay.mean, static_cast<double>(cfg.benchmark.max_steps + 1));
  }
  auto first = slurp(dir_ / "efficiency.csv");
  cmd_benchmark(cfg, {1}, dir_);
  EXPECT_EQ(slurp(dir_ / "efficiency.csv"), first);
}

TEST(GradCheckCommand, PassesOnEveryPrimitiveAndTheJointLoss) {
  auto summary = cmd_grad_check(2, 5);
  EXPECT_TRUE(summary.passed());
  EXPECT_EQ(summary.reports.size(), tc::primitive_cases().size() + 3);
}
