#include "dghif/tensorcore/grad_suite.hpp"

#include <algorithm>
#include <random>

#include "dghif/tensorcore/ops.hpp"
#include "dghif/tensorcore/params.hpp"
#include "dghif/tensorcore/precision.hpp"

namespace dghif::tc {

namespace {

std::mt19937_64 g_mask_rng(0);

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

const std::vector<PrimitiveCase>& primitive_cases() {
  const std::vector<std::size_t> off{0, 2, 5, 6};
  static const std::vector<PrimitiveCase> cases{
      {"add", {{3, 4}, {4}}, [](auto& t) { return add(t[0], t[1]); }},
      {"sub", {{3, 4}, {3, 4}}, [](auto& t) { return sub(t[0], t[1]); }},
      {"mul", {{2, 3, 4}, {3, 4}}, [](auto& t) { return mul(t[0], t[1]); }},
      {"div", {{3, 4}, {3, 4}}, [](auto& t) { return div(t[0], add(t[1], Tensor::full({3, 4}, 3.0))); }},
      {"scale", {{5}}, [](auto& t) { return scale(t[0], -1.7); }},
      {"scale_by", {{2, 3}, {}}, [](auto& t) { return scale_by(t[0], t[1]); }},
      {"scale_rows", {{4, 3}, {4}}, [](auto& t) { return scale_rows(t[0], t[1]); }},
      {"matmul", {{3, 4}, {4, 2}}, [](auto& t) { return matmul(t[0], t[1]); }},
      {"matmul_batched", {{2, 3, 4}, {4, 2}}, [](auto& t) { return matmul(t[0], t[1]); }},
      {"matmul_vector", {{3, 4}, {4}}, [](auto& t) { return matmul(t[0], t[1]); }},
      {"concat_last", {{3, 2}, {3, 5}}, [](auto& t) { return concat_last({t[0], t[1]}); }},
      {"stack", {{2, 3}, {2, 3}}, [](auto& t) { return stack({t[0], t[1]}); }},
      {"reshape", {{2, 6}}, [](auto& t) { return reshape(t[0], {3, 4}); }},
      {"pad_rows", {{2, 3}}, [](auto& t) { return pad_rows(t[0], 4); }},
      {"gather_rows", {{4, 3}}, [](auto& t) { return gather_rows(t[0], std::vector<std::size_t>{3, 0, 3}); }},
      {"where_rows", {{3, 2}, {3, 2}}, [](auto& t) { return where_rows({true, false, true}, t[0], t[1]); }},
      {"softmax_last", {{3, 5}}, [](auto& t) { return softmax_last(t[0]); }},
      {"sigmoid", {{6}}, [](auto& t) { return sigmoid(t[0]); }},
      {"tanh", {{6}}, [](auto& t) { return tanh(t[0]); }},
      {"gelu", {{6}}, [](auto& t) { return gelu(t[0]); }},
      {"silu", {{6}}, [](auto& t) { return silu(t[0]); }},
      {"exp", {{6}}, [](auto& t) { return exp(t[0]); }},
      {"log", {{6}}, [](auto& t) { return log(t[0]); }, 0.5, 3.0},
      {"softplus", {{6}}, [](auto& t) { return softplus(t[0]); }},
      {"clamp_min", {{6}}, [](auto& t) { return clamp_min(t[0], 0.25); }},
      {"sum", {{3, 3}}, [](auto& t) { return sum(t[0]); }},
      {"mean", {{3, 3}}, [](auto& t) { return mean(t[0]); }},
      {"sum_last", {{3, 4}}, [](auto& t) { return sum_last(t[0]); }},
      {"layer_norm", {{3, 5}, {5}, {5}}, [](auto& t) { return layer_norm(t[0], t[1], t[2]); }},
      {"dropout_eval", {{6}}, [](auto& t) { return dropout(t[0], 0.2, false, g_mask_rng); }},
      {"dropout_train",
       {{6}},
       [](auto& t) {
         std::mt19937_64 rng(9);  // fixed mask across evaluations
         return dropout(t[0], 0.3, true, rng);
       }},
      {"segment_softmax", {{6}}, [off](auto& t) { return segment_softmax(t[0], off); }},
      {"segment_weighted_sum", {{6, 3}, {6}}, [off](auto& t) { return segment_weighted_sum(t[0], t[1], off); }},
      {"segment_mean", {{6, 3}}, [off](auto& t) { return segment_mean(t[0], off); }},
      {"segment_attention",
       {{6, 4}, {6, 4}, {6, 4}},
       [off](auto& t) { return segment_attention(t[0], t[1], t[2], off, 2); }},
      {"neighbor_sum",
       {{4, 3}},
       [](auto& t) {
         Csr g;
         g.offsets = {0, 2, 2, 5};
         g.indices = {1, 3, 0, 1, 2};
         return neighbor_sum(t[0], Adjacency::from_gather(g, 4));
       }},
      {"cross_entropy", {{3, 5}}, [](auto& t) { return cross_entropy(t[0], std::vector<std::size_t>{4, 0, 2}); }},
      {"bce_with_logits", {{4}}, [](auto& t) { return bce_with_logits(t[0], std::vector<double>{1, 0, 1, 0}); }},
  };
  return cases;
}

GradCheckReport check_primitive(const PrimitiveCase& c, std::size_t points, std::uint64_t seed,
                                const GradCheckOptions& options) {
  PrecisionScope f64(Precision::f64);
  std::mt19937_64 rng(seed);
  GradCheckReport merged;
  merged.tolerance = options.tolerance;
  for (std::size_t i = 0; i < c.shapes.size(); ++i) merged.entries.push_back({c.name + "_in" + std::to_string(i)});
  for (std::size_t point = 0; point < points; ++point) {
    std::vector<Tensor> inputs;
    ParamList params;
    for (std::size_t i = 0; i < c.shapes.size(); ++i) {
      inputs.push_back(random_tensor(c.shapes[i], rng, c.lo, c.hi, true));
      params.push_back({merged.entries[i].name, "check", inputs.back()});
    }
    const Tensor probe = c.op(inputs);
    const Tensor weights = random_tensor(probe.shape(), rng, -1.0, 1.0, false);
    auto report = grad_check([&] { return sum(mul(c.op(inputs), weights)); }, params, options);
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
      auto& m = merged.entries[i];
      m.coords_checked += report.entries[i].coords_checked;
      m.max_abs_error = std::max(m.max_abs_error, report.entries[i].max_abs_error);
      m.max_rel_error = std::max(m.max_rel_error, report.entries[i].max_rel_error);
    }
  }
  return merged;
}

}  // namespace dghif::tc
