#include "dghif/trainpipe/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/precision.hpp"

namespace dghif::train {

AdamW::AdamW(tc::ParamList params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  reset();
}

void AdamW::reset() {
  state_.assign(params_.size(), {});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    state_[i].m.assign(params_[i].tensor.numel(), 0.0);
    state_[i].v.assign(params_[i].tensor.numel(), 0.0);
  }
}

void AdamW::step(double lr, const std::set<std::string>& frozen, const std::map<std::string, double>& group_multipliers) {
  auto active = [&](const tc::NamedParam& p) { return !frozen.contains(p.group) && p.tensor.has_grad(); };
  for (const auto& p : params_) {
    if (!active(p)) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw DomainError(fmt::format("non-finite gradient in parameter group '{}' ({})", p.group, p.name));
      }
    }
  }
  const auto& c = config_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!active(p)) continue;
    auto it = group_multipliers.find(p.group);
    const double rate = lr * (it == group_multipliers.end() ? 1.0 : it->second);
    const double decay = p.tensor.rank() >= 2 ? 1.0 - rate * c.weight_decay : 1.0;
    auto& s = state_[i];
    ++s.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
    auto values = p.tensor.mutable_values();
    auto grad = p.tensor.grad();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grad[k];
      s.m[k] = c.beta1 * s.m[k] + (1.0 - c.beta1) * g;
      s.v[k] = c.beta2 * s.v[k] + (1.0 - c.beta2) * g * g;
      const double m_hat = s.m[k] / bc1;
      const double v_hat = s.v[k] / bc2;
      values[k] = tc::quantize(values[k] * decay - rate * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

}  // namespace dghif::train
