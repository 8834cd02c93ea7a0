#include "dghif/tensorcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dghif/tensorcore/precision.hpp"

namespace dghif::tc {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParamList& params,
                           const GradCheckOptions& options) {
  PrecisionScope full(Precision::f64);
  zero_grads(params);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(loss_fn());
  }
  const auto evaluate = [&] {
    NoGradScope no_grad;
    return loss_fn().item();
  };

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& p : params) {
    GradCheckEntry entry{p.name};
    Tensor t = p.tensor;
    const std::size_t n = t.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords != 0 && n > options.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords);
    }
    const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                      : std::vector<double>(n, 0.0);
    auto values = t.mutable_values();
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = evaluate();
      values[i] = saved - options.step;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
      ++entry.coords_checked;
    }
    report.entries.push_back(std::move(entry));
  }
  zero_grads(params);
  return report;
}

}  // namespace dghif::tc
