#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "dghif/tensorcore/params.hpp"

namespace dghif::train {

/// Two-layer task head MLP_t: z -> SiLU(z W1 + b1) W2 + b2, one logit per row.
struct RiskHead {
  tc::Tensor w1, b1, w2, b2;

  static RiskHead init(std::size_t in_dim, std::size_t hidden, std::mt19937_64& rng);
  tc::ParamList parameters() const;  // group "head"
};

/// Logits [B] for fused vectors z [B, in_dim].
tc::Tensor risk_logits(const tc::Tensor& z, const RiskHead& head);

/// Mean BCE of sigmoid(logits) against labels. DomainError for a label
/// outside {0, 1}.
tc::Tensor risk_loss(const tc::Tensor& logits, std::span<const double> labels);

enum class LambdaMode { Fixed, Cosine, Learned };

/// Weight of the relational loss in the joint objective.
///   Fixed:   lambda0
///   Cosine:  lambda0 * (1 + cos(pi * step / total_steps)) / 2
///   Learned: softplus(raw), raw initialised so that the value starts at lambda0
struct LambdaPolicy {
  LambdaMode mode = LambdaMode::Fixed;
  double lambda0 = 0.5;
  std::size_t total_steps = 0;  // Cosine horizon
  tc::Tensor raw;               // Learned only

  static LambdaPolicy make(LambdaMode mode, double lambda0, std::size_t total_steps = 0);

  /// Scalar tensor; carries a gradient into `raw` in Learned mode.
  tc::Tensor effective(std::size_t step) const;
  double value(std::size_t step) const;
  tc::ParamList parameters() const;  // group "lambda", empty unless Learned
};

/// l_risk + lambda_eff(step) * l_rel.
tc::Tensor joint_loss(const tc::Tensor& l_risk, const tc::Tensor& l_rel, const LambdaPolicy& policy,
                      std::size_t step);

/// Linear warmup from 0 to lr_peak over floor(warmup_frac * total_steps)
/// steps, then half-cosine decay from lr_peak to lr_min at total_steps.
/// DomainError for total_steps = 0, step > total_steps or warmup_frac
/// outside [0, 1).
double lr_schedule(std::size_t step, std::size_t total_steps, double lr_peak, double lr_min, double warmup_frac);

}  // namespace dghif::train
