#include "dghif/tensorcore/params.hpp"

#include <cmath>
#include <cstring>

namespace dghif::tc {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform({fan_in, fan_out}, -a, a, rng);
}

Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

Tensor normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(numel(shape));
  for (double& v : values) v = dist(rng);
  return Tensor::from_values(std::move(shape), std::move(values), true);
}

std::uint64_t hash_values(const ParamList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    for (double v : p.tensor.values()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) p.tensor.node()->grad.clear();
}

}  // namespace dghif::tc
