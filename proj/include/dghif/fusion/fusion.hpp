#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dghif/tensorcore/params.hpp"

namespace dghif::fusion {

enum class FusionMode { Gated, Concat, TextOnly, GraphOnly };

struct FusionConfig {
  std::size_t text_dim = 64;
  std::size_t graph_dim = 64;
  std::size_t dim = 64;  // shared width d
  double gate_dropout = 0.2;
  FusionMode mode = FusionMode::Gated;

  /// Width of z: 2d for Concat, d otherwise.
  std::size_t output_dim() const noexcept { return mode == FusionMode::Concat ? 2 * dim : dim; }
};

struct FusionParams {
  FusionConfig config;
  tc::Tensor ln_p_g, ln_p_b, w_p, b_p;  // text view
  tc::Tensor ln_q_g, ln_q_b, w_q, b_q;  // graph view
  tc::Tensor gate_w1, gate_b1;          // [4d, d]
  tc::Tensor gate_w2, gate_b2;          // [d, d]

  static FusionParams init(const FusionConfig& config, std::mt19937_64& rng);
  /// Group "fusion"; only the tensors the configured mode uses.
  tc::ParamList parameters() const;
};

/// p = SiLU(W_p LN(h) + b_p)   for h [B, text_dim]
tc::Tensor project_text(const tc::Tensor& h, const FusionParams& params);
/// q = SiLU(W_q LN(v) + b_q)   for v [B, graph_dim]
tc::Tensor project_graph(const tc::Tensor& v, const FusionParams& params);

struct Views {
  tc::Tensor p, q;
};
Views project_views(const tc::Tensor& h, const tc::Tensor& v, const FusionParams& params);

struct InteractionFeatures {
  tc::Tensor r_times;  // p * q
  tc::Tensor r_delta;  // p - q
};
InteractionFeatures interaction_features(const tc::Tensor& p, const tc::Tensor& q);

/// Pre-sigmoid gate network output MLP_g([p; q; r_times; r_delta]).
tc::Tensor gate_logits(const tc::Tensor& p, const tc::Tensor& q, const InteractionFeatures& r,
                       const FusionParams& params);
/// g = sigmoid(dropout(MLP_g([p; q; r_times; r_delta]))); dropout only in train mode.
tc::Tensor compute_gate(const tc::Tensor& p, const tc::Tensor& q, const InteractionFeatures& r,
                        const FusionParams& params, bool train, std::mt19937_64& rng);

struct FusionOutput {
  tc::Tensor z;                // [B, output_dim]
  tc::Tensor g;                // [B, d] in Gated mode, undefined otherwise
  tc::Tensor p, q;             // projected views; q undefined when no graph view was given
  std::vector<bool> bypassed;  // rows that fell back to z = p (no graph view)
};

/// Fuses text embeddings h [B, text_dim] with graph embeddings v [B, graph_dim].
/// `v` may be undefined (every row is a cold start) and `has_graph` may mark
/// individual rows as cold starts; such rows get z = p exactly in Gated mode
/// and z = [p; 0] in Concat mode. GraphOnly mode rejects cold starts.
FusionOutput fuse(const tc::Tensor& h, const tc::Tensor& v, const FusionParams& params, bool train,
                  std::mt19937_64& rng, const std::vector<bool>& has_graph = {});

/// Mean of each row of g: the per-example gate mass.
std::vector<double> gate_masses(const tc::Tensor& g);

struct CohortGateStats {
  std::string cohort;
  double mean_gate = 0.0;
  double frac_below = 0.0;
  std::size_t n = 0;
};

inline constexpr double kGateThreshold = 0.3;

/// Per-cohort mean of per-example gate masses and the fraction of examples
/// whose mass is below `threshold`. Cohorts appear in first-seen order.
std::vector<CohortGateStats> gate_audit(std::span<const double> masses, std::span<const std::string> cohorts,
                                        double threshold = kGateThreshold);

/// CSV cohort,mean_gate,frac_below_threshold,n
void write_gate_audit(std::ostream& out, const std::vector<CohortGateStats>& stats);

}  // namespace dghif::fusion
