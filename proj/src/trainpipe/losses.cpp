#include "dghif/trainpipe/losses.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"

namespace dghif::train {

using tc::Tensor;

RiskHead RiskHead::init(std::size_t in_dim, std::size_t hidden, std::mt19937_64& rng) {
  RiskHead h;
  h.w1 = tc::xavier_uniform(in_dim, hidden, rng);
  h.b1 = Tensor::zeros({hidden}, true);
  h.w2 = tc::xavier_uniform(hidden, 1, rng);
  h.b2 = Tensor::zeros({1}, true);
  return h;
}

tc::ParamList RiskHead::parameters() const {
  return {{"head.w1", "head", w1}, {"head.b1", "head", b1}, {"head.w2", "head", w2}, {"head.b2", "head", b2}};
}

Tensor risk_logits(const Tensor& z, const RiskHead& head) {
  Tensor hidden = tc::silu(tc::add(tc::matmul(z, head.w1), head.b1));
  Tensor out = tc::add(tc::matmul(hidden, head.w2), head.b2);
  return tc::reshape(out, {z.dim(0)});
}

Tensor risk_loss(const Tensor& logits, std::span<const double> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DomainError(fmt::format("risk_loss: label {} at index {} is not 0 or 1", labels[i], i));
    }
  }
  return tc::bce_with_logits(logits, labels);
}

LambdaPolicy LambdaPolicy::make(LambdaMode mode, double lambda0, std::size_t total_steps) {
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw ConfigError("lambda0 must be finite and non-negative");
  LambdaPolicy p;
  p.mode = mode;
  p.lambda0 = lambda0;
  p.total_steps = total_steps;
  if (mode == LambdaMode::Learned) {
    if (lambda0 <= 0.0) throw ConfigError("a learned lambda needs lambda0 > 0");
    p.raw = Tensor::scalar(std::log(std::expm1(lambda0)), true);
  }
  return p;
}

Tensor LambdaPolicy::effective(std::size_t step) const {
  if (mode == LambdaMode::Learned) return tc::softplus(raw);
  return Tensor::scalar(value(step));
}

double LambdaPolicy::value(std::size_t step) const {
  switch (mode) {
    case LambdaMode::Fixed:
      return lambda0;
    case LambdaMode::Cosine: {
      if (total_steps == 0) return lambda0;
      double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
      return lambda0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    }
    case LambdaMode::Learned:
      return std::log1p(std::exp(-std::abs(raw.item()))) + std::max(raw.item(), 0.0);
  }
  return lambda0;
}

tc::ParamList LambdaPolicy::parameters() const {
  if (mode != LambdaMode::Learned) return {};
  return {{"lambda.raw", "lambda", raw}};
}

Tensor joint_loss(const Tensor& l_risk, const Tensor& l_rel, const LambdaPolicy& policy, std::size_t step) {
  return tc::add(l_risk, tc::scale_by(l_rel, policy.effective(step)));
}

double lr_schedule(std::size_t step, std::size_t total_steps, double lr_peak, double lr_min, double warmup_frac) {
  if (total_steps == 0) throw DomainError("lr_schedule: total_steps must be positive");
  if (step > total_steps) throw DomainError(fmt::format("lr_schedule: step {} beyond total {}", step, total_steps));
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) throw DomainError("lr_schedule: warmup_frac must lie in [0, 1)");
  auto warmup = static_cast<std::size_t>(std::floor(warmup_frac * static_cast<double>(total_steps)));
  if (step < warmup) return lr_peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (step == warmup) return lr_peak;
  if (step == total_steps) return lr_min;
  double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return lr_min + 0.5 * (lr_peak - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace dghif::train
