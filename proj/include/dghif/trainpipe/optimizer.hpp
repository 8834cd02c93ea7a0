#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dghif/tensorcore/params.hpp"

namespace dghif::train {

struct AdamWConfig {
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct MomentState {
  std::vector<double> m, v;
  std::uint64_t step = 0;
};

/// Adam with decoupled weight decay:
///   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
/// Decay applies to parameters of rank >= 2 (weight matrices and embedding
/// tables); vectors and scalars are only moved by the gradient.
class AdamW {
 public:
  AdamW(tc::ParamList params, AdamWConfig config = {});

  /// Updates every parameter outside `frozen` that holds a gradient, with
  /// learning rate lr * multiplier(group) (multiplier defaults to 1).
  /// DomainError naming the group on a non-finite gradient; nothing is
  /// updated in that case.
  void step(double lr, const std::set<std::string>& frozen = {},
            const std::map<std::string, double>& group_multipliers = {});

  /// Clears every moment estimate and step counter.
  void reset();

  const tc::ParamList& params() const noexcept { return params_; }
  const AdamWConfig& config() const noexcept { return config_; }
  std::vector<MomentState>& state() noexcept { return state_; }
  const std::vector<MomentState>& state() const noexcept { return state_; }

 private:
  tc::ParamList params_;
  AdamWConfig config_;
  std::vector<MomentState> state_;
};

}  // namespace dghif::train
