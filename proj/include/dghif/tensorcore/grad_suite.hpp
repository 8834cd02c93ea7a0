#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dghif/tensorcore/grad_check.hpp"
#include "dghif/tensorcore/tensor.hpp"

namespace dghif::tc {

/// One differentiable primitive with the input shapes it is exercised on.
struct PrimitiveCase {
  std::string name;
  std::vector<Shape> shapes;
  std::function<Tensor(const std::vector<Tensor>&)> op;
  double lo = -2.0;  // inputs are drawn from U(lo, hi)
  double hi = 2.0;
};

/// Every autodiff primitive.
const std::vector<PrimitiveCase>& primitive_cases();

/// Checks `c` at `points` random inputs. The output is contracted with a
/// fixed random weighting so that every element contributes to the loss.
/// Entries are named "<case>_in<i>"; the worst error per input is kept.
GradCheckReport check_primitive(const PrimitiveCase& c, std::size_t points, std::uint64_t seed,
                                const GradCheckOptions& options = {.step = 1e-5, .tolerance = 1e-4, .floor = 1e-4});

}  // namespace dghif::tc
