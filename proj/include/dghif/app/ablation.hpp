#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dghif/app/experiment.hpp"

namespace dghif::app {

/// A named set of [ablation] assignments applied on top of a base config.
struct Variant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> toggles;  // key without the "ablation." prefix
};

/// Applies the toggles; ConfigError for a toggle that is not an ablation key.
ExperimentConfig apply_variant(const ExperimentConfig& base, const Variant& variant);

/// Built-in grids:
///   table1: Full, -SemanticGuide, -AdaptNorm, -GatedFusion
///   table2: NLP-only, GNN-only, Full
///   table4: FixedNorm, LearnedNorm, NoRelationWeights, Full
///   table5: Full, SkipTextPretrain, SkipGraphPretrain, SkipAllPretrain
/// ConfigError for any other name.
std::vector<Variant> builtin_grid(std::string_view name);
std::vector<std::string> builtin_grid_names();

inline constexpr std::string_view kFullVariant = "Full";

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};
Stat summarize(std::span<const double> values);

struct PairedTest {
  double mean_diff = 0.0;  // variant minus full
  double t = 0.0;
  double p = 1.0;          // two-sided; NaN when the differences are all equal but nonzero
};
/// Paired t-test of a against b. DataError when lengths differ or n < 2.
PairedTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// results[v][s] belongs to variants[v] and seeds[s].
using GridResults = std::vector<std::vector<VariantRun>>;

/// Runs every (variant, seed) pair on up to `workers` threads. Each job owns
/// its data, model and RNG, so results do not depend on the worker count.
/// `progress` (if set) is called after each job from the finishing thread.
GridResults run_grid(const ExperimentConfig& base, const std::vector<Variant>& variants,
                     const std::vector<std::uint64_t>& seeds, std::size_t workers, bool with_efficiency,
                     const std::function<void(const Variant&, std::uint64_t, const VariantRun&)>& progress = {});

struct AblationRow {
  std::string name;
  Stat f1, metaphor_acc, latency_ms, convergence_epoch;
  std::optional<PairedTest> vs_full;  // absent for Full itself or without a Full row
};

std::vector<AblationRow> ablation_rows(const std::vector<Variant>& variants, const GridResults& results);

/// CSV: variant,f1_mean,f1_std,metaphor_acc_mean,metaphor_acc_std,convergence_epoch_mean,
/// convergence_epoch_std,seeds,f1_diff_vs_full,t_vs_full,p_vs_full. Deterministic for a config.
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

/// CSV: variant,latency_ms_mean,latency_ms_std (per-seed medians). Wall-clock, so not reproducible.
void write_latency_csv(std::ostream& out, const std::vector<AblationRow>& rows);

struct EfficiencyRow {
  std::string name;
  Stat delay, sensitivity, snr;
};

std::vector<EfficiencyRow> efficiency_rows(const std::vector<Variant>& variants, const GridResults& results);

/// CSV: variant,delay_steps,sensitivity_pct,snr_db (5-seed means). A metric
/// undefined on every seed is written as an empty field.
void write_efficiency_csv(std::ostream& out, const std::vector<EfficiencyRow>& rows);

/// Per-seed detail: variant,seed,best_val_f1,metaphor_acc,convergence_epoch[,delay_steps,sensitivity_pct,snr_db].
void write_seed_csv(std::ostream& out, const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds,
                    const GridResults& results, bool with_efficiency);

}  // namespace dghif::app
