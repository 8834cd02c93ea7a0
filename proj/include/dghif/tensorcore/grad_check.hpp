#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dghif/tensorcore/params.hpp"

namespace dghif::tc {

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor),
  // so that coordinates with vanishing gradients are judged absolutely.
  double floor = 1e-3;
  // Coordinates checked per tensor; 0 means all. Larger tensors are sampled.
  std::size_t max_coords = 0;
  std::uint64_t seed = 7;
};

/// Compares the tape gradient of `loss_fn` with central differences for every
/// tensor in `params`. `loss_fn` must be deterministic and return a scalar.
/// Runs in 64-bit precision regardless of the global setting.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParamList& params,
                           const GradCheckOptions& options = {});

}  // namespace dghif::tc
