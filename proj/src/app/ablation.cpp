#include "dghif/app/ablation.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "dghif/common/errors.hpp"

namespace dghif::app {

namespace {

std::string fmt_value(double v) { return std::isfinite(v) ? fmt::format("{:.6f}", v) : std::string(); }

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_value(*v) : std::string(); }

Stat summarize_optional(const std::vector<std::optional<double>>& values) {
  std::vector<double> present;
  for (const auto& v : values) {
    if (v) present.push_back(*v);
  }
  return summarize(present);
}

}  // namespace

ExperimentConfig apply_variant(const ExperimentConfig& base, const Variant& variant) {
  ExperimentConfig cfg = base;
  for (const auto& [key, value] : variant.toggles) {
    try {
      set_config_value(cfg, "ablation." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("variant '{}': unknown or invalid toggle '{}={}' ({})", variant.name, key, value,
                                    e.what()));
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<Variant> builtin_grid(std::string_view name) {
  const Variant full{std::string(kFullVariant), {}};
  if (name == "table1") {
    return {full,
            {"-SemanticGuide", {{"semantic_guide_off", "true"}}},
            {"-AdaptNorm", {{"norm_mode", "fixed_sqrt"}}},
            {"-GatedFusion", {{"fusion_mode", "concat"}}}};
  }
  if (name == "table2") {
    return {{"NLP-only", {{"fusion_mode", "text_only"}}}, {"GNN-only", {{"fusion_mode", "graph_only"}}}, full};
  }
  if (name == "table4") {
    return {{"FixedNorm", {{"norm_mode", "fixed_sqrt"}}},
            {"LearnedNorm", {{"relation_weights_off", "true"}}},
            {"NoRelationWeights", {{"norm_mode", "fixed_sqrt"}, {"relation_weights_off", "true"}}},
            full};
  }
  if (name == "table5") {
    return {full,
            {"SkipTextPretrain", {{"skip_text_pretrain", "true"}}},
            {"SkipGraphPretrain", {{"skip_graph_pretrain", "true"}}},
            {"SkipAllPretrain", {{"skip_text_pretrain", "true"}, {"skip_graph_pretrain", "true"}}}};
  }
  throw ConfigError(fmt::format("unknown grid '{}' (known: table1, table2, table4, table5)", name));
}

std::vector<std::string> builtin_grid_names() { return {"table1", "table2", "table4", "table5"}; }

Stat summarize(std::span<const double> values) {
  Stat s;
  s.n = values.size();
  if (s.n == 0) {
    s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired test needs equally many values on both sides");
  if (a.size() < 2) throw DataError("paired test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  Stat s = summarize(d);
  PairedTest out;
  out.mean_diff = s.mean;
  if (s.std == 0.0) {
    out.t = s.mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), s.mean);
    out.p = s.mean == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.t = s.mean / (s.std / std::sqrt(static_cast<double>(s.n)));
  boost::math::students_t dist(static_cast<double>(s.n - 1));
  out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(out.t)));
  return out;
}

GridResults run_grid(const ExperimentConfig& base, const std::vector<Variant>& variants,
                     const std::vector<std::uint64_t>& seeds, std::size_t workers, bool with_efficiency,
                     const std::function<void(const Variant&, std::uint64_t, const VariantRun&)>& progress) {
  std::vector<ExperimentConfig> configs;
  for (const auto& v : variants) configs.push_back(apply_variant(base, v));  // fail before any compute

  GridResults results(variants.size(), std::vector<VariantRun>(seeds.size()));
  const std::size_t jobs = variants.size() * seeds.size();
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      std::size_t j = next.fetch_add(1);
      if (j >= jobs) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      const std::size_t v = j / seeds.size(), s = j % seeds.size();
      try {
        VariantRun run = run_variant(configs[v], seeds[s], with_efficiency);
        std::lock_guard lock(mu);
        results[v][s] = std::move(run);
        if (progress) progress(variants[v], seeds[s], results[v][s]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, jobs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<AblationRow> ablation_rows(const std::vector<Variant>& variants, const GridResults& results) {
  auto f1_of = [&](std::size_t v) {
    std::vector<double> out;
    for (const auto& r : results[v]) out.push_back(r.result.summary.best_val_f1);
    return out;
  };
  std::optional<std::size_t> full;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    if (variants[v].name == kFullVariant) full = v;
  }
  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationRow row;
    row.name = variants[v].name;
    std::vector<double> latency, convergence;
    std::vector<std::optional<double>> metaphor;
    for (const auto& r : results[v]) {
      latency.push_back(r.latency_ms);
      convergence.push_back(static_cast<double>(r.result.summary.convergence_epoch));
      metaphor.push_back(r.result.summary.metaphor_acc);
    }
    auto f1 = f1_of(v);
    row.f1 = summarize(f1);
    row.metaphor_acc = summarize_optional(metaphor);
    row.latency_ms = summarize(latency);
    row.convergence_epoch = summarize(convergence);
    if (full && *full != v && f1.size() >= 2) row.vs_full = paired_t_test(f1, f1_of(*full));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,f1_mean,f1_std,metaphor_acc_mean,metaphor_acc_std,convergence_epoch_mean,convergence_epoch_std,"
         "seeds,f1_diff_vs_full,t_vs_full,p_vs_full\n";
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{}\n", r.name, fmt_value(r.f1.mean), fmt_value(r.f1.std),
               fmt_value(r.metaphor_acc.mean), fmt_value(r.metaphor_acc.std), fmt_value(r.convergence_epoch.mean),
               fmt_value(r.convergence_epoch.std), r.f1.n, r.vs_full ? fmt_value(r.vs_full->mean_diff) : "",
               r.vs_full ? fmt_value(r.vs_full->t) : "", r.vs_full ? fmt_value(r.vs_full->p) : "");
  }
}

void write_latency_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,latency_ms_mean,latency_ms_std\n";
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{}\n", r.name, fmt_value(r.latency_ms.mean), fmt_value(r.latency_ms.std));
  }
}

std::vector<EfficiencyRow> efficiency_rows(const std::vector<Variant>& variants, const GridResults& results) {
  std::vector<EfficiencyRow> rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<double> delay;
    std::vector<std::optional<double>> sens, snr;
    for (const auto& r : results[v]) {
      if (!r.efficiency) throw StateError(fmt::format("variant '{}' ran without efficiency metrics", variants[v].name));
      delay.push_back(r.efficiency->delay);
      sens.push_back(r.efficiency->sensitivity);
      snr.push_back(r.efficiency->snr);
    }
    rows.push_back({variants[v].name, summarize(delay), summarize_optional(sens), summarize_optional(snr)});
  }
  return rows;
}

void write_efficiency_csv(std::ostream& out, const std::vector<EfficiencyRow>& rows) {
  out << "variant,delay_steps,sensitivity_pct,snr_db\n";
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{},{}\n", r.name, fmt_value(r.delay.mean), fmt_value(r.sensitivity.mean),
               fmt_value(r.snr.mean));
  }
}

void write_seed_csv(std::ostream& out, const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds,
                    const GridResults& results, bool with_efficiency) {
  out << "variant,seed,best_val_f1,metaphor_acc,convergence_epoch";
  if (with_efficiency) out << ",delay_steps,sensitivity_pct,snr_db";
  out << '\n';
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& r = results[v][s];
      fmt::print(out, "{},{},{},{},{}", variants[v].name, seeds[s], fmt_value(r.result.summary.best_val_f1),
                 fmt_optional(r.result.summary.metaphor_acc), r.result.summary.convergence_epoch);
      if (with_efficiency) {
        const auto& e = r.efficiency;
        fmt::print(out, ",{},{},{}", e ? fmt_value(e->delay) : "", e ? fmt_optional(e->sensitivity) : "",
                   e ? fmt_optional(e->snr) : "");
      }
      out << '\n';
    }
  }
}

}  // namespace dghif::app
