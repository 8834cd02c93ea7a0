#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dghif/tensorcore/tensor.hpp"

namespace dghif::tc {

/// A learnable tensor with a stable name and the optimizer group it belongs to.
struct NamedParam {
  std::string name;
  std::string group;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

/// Leaf tensor [fan_in, fan_out] drawn from U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng);
Tensor normal(Shape shape, double stddev, std::mt19937_64& rng);

/// FNV-1a over the raw bytes of every parameter value in list order.
std::uint64_t hash_values(const ParamList& params);

/// Clears gradients on every parameter.
void zero_grads(const ParamList& params);

}  // namespace dghif::tc
