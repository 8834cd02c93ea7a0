#include "dghif/tensorcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/kernels.hpp"
#include "dghif/tensorcore/precision.hpp"

namespace dghif::tc {

namespace {

using Grad = std::span<const double>;

Tensor result(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  quantize(node->value);
  return Tensor(std::move(node));
}

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

/// Appends a record for `out` when a tape is active and some input needs a
/// gradient. `fn` receives the output gradient.
template <class F>
void record(const char* op, Tensor& out, std::vector<Tensor> inputs, F&& fn) {
  Tape* tape = active_tape();
  if (tape == nullptr || !any_requires_grad(inputs)) return;
  out.node()->requires_grad = true;
  Tape::Record rec;
  rec.op = op;
  rec.inputs.reserve(inputs.size());
  for (const auto& in : inputs) rec.inputs.push_back(in.node());
  rec.output = out.node();
  rec.backward = [node = out.node().get(), f = std::forward<F>(fn)]() { f(Grad(node->grad)); };
  tape->push(std::move(rec));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
                   " do not conform");
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) throw StateError(std::string(op) + ": undefined tensor");
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

struct Broadcast {
  Shape out;
  std::size_t inner = 0;  // size of the broadcast operand
  bool a_full = true;
  bool b_full = true;
};

Broadcast resolve(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  Broadcast bc;
  if (a.shape() == b.shape()) {
    bc.out = a.shape();
    bc.inner = a.numel();
  } else if (b.rank() < a.rank() && is_suffix(b.shape(), a.shape())) {
    bc.out = a.shape();
    bc.inner = b.numel();
    bc.b_full = false;
  } else if (a.rank() < b.rank() && is_suffix(a.shape(), b.shape())) {
    bc.out = b.shape();
    bc.inner = a.numel();
    bc.a_full = false;
  } else {
    shape_error(op, a.shape(), b.shape());
  }
  return bc;
}

template <class Fwd, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  const Broadcast bc = resolve(op, a, b);
  const std::size_t n = numel(bc.out);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = fwd(av[bc.a_full ? i : i % bc.inner], bv[bc.b_full ? i : i % bc.inner]);
  }
  Tensor y = result(bc.out, std::move(out));
  record(op, y, {a, b}, [a, b, bc, n, da, db](Grad g) {
    const auto av = a.values();
    const auto bv = b.values();
    if (a.requires_grad()) {
      auto ga = a.node()->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ia = bc.a_full ? i : i % bc.inner;
        const std::size_t ib = bc.b_full ? i : i % bc.inner;
        ga[ia] += g[i] * da(av[ia], bv[ib]);
      }
    }
    if (b.requires_grad()) {
      auto gb = b.node()->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ia = bc.a_full ? i : i % bc.inner;
        const std::size_t ib = bc.b_full ? i : i % bc.inner;
        gb[ib] += g[i] * db(av[ia], bv[ib]);
      }
    }
  });
  return y;
}

/// `df(x, y)` is the derivative given input x and output y.
template <class Fwd, class DF>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, DF df) {
  require_defined(op, x);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  Tensor y = result(x.shape(), std::move(out));
  record(op, y, {x}, [x, yn = y.node().get(), df](Grad g) {
    const auto xv = x.values();
    auto gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * df(xv[i], yn->value[i]);
  });
  return y;
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::size_t last_dim(const char* op, const Tensor& x) {
  if (x.rank() == 0) throw ShapeError(std::string(op) + ": needs rank >= 1, got scalar");
  return x.shape().back();
}

void check_offsets(const char* op, std::span<const std::size_t> offsets, std::size_t rows) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows) {
    throw ShapeError(std::string(op) + ": segment offsets must start at 0 and end at " +
                     std::to_string(rows));
  }
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    if (offsets[s + 1] < offsets[s]) throw ShapeError(std::string(op) + ": offsets must be nondecreasing");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise binary

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_defined("div", b);
  for (double v : b.values()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  require_defined("scale_by", x);
  require_defined("scale_by", s);
  if (!s.is_scalar()) shape_error("scale_by", x.shape(), s.shape());
  const double f = s.values()[0];
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * f;
  Tensor y = result(x.shape(), std::move(out));
  record("scale_by", y, {x, s}, [x, s](Grad g) {
    const auto xv = x.values();
    const double f = s.values()[0];
    if (x.requires_grad()) {
      auto gx = x.node()->grad_buffer();
      for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * f;
    }
    if (s.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xv.size(); ++i) acc += g[i] * xv[i];
      s.node()->grad_buffer()[0] += acc;
    }
  });
  return y;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_defined("scale_rows", x);
  require_defined("scale_rows", s);
  if (x.rank() == 0 || s.rank() != 1 || s.dim(0) != x.dim(0)) shape_error("scale_rows", x.shape(), s.shape());
  const std::size_t rows = x.dim(0);
  const std::size_t inner = rows ? x.numel() / rows : 0;
  const auto xv = x.values();
  const auto sv = s.values();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < inner; ++c) out[r * inner + c] = xv[r * inner + c] * sv[r];
  Tensor y = result(x.shape(), std::move(out));
  record("scale_rows", y, {x, s}, [x, s, rows, inner](Grad g) {
    const auto xv = x.values();
    const auto sv = s.values();
    if (x.requires_grad()) {
      auto gx = x.node()->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < inner; ++c) gx[r * inner + c] += g[r * inner + c] * sv[r];
    }
    if (s.requires_grad()) {
      auto gs = s.node()->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < inner; ++c) acc += g[r * inner + c] * xv[r * inner + c];
        gs[r] += acc;
      }
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// linear algebra and structure

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  if (a.rank() == 0 || b.rank() == 0 || b.rank() > 2 || a.shape().back() != b.dim(0)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
  const std::size_t m = k ? a.numel() / k : 0;
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  if (b.rank() == 2) out_shape.push_back(n);
  std::vector<double> out(m * n, 0.0);
  kernels::gemm({m, k, n}, a.values(), b.values(), out);
  Tensor y = result(std::move(out_shape), std::move(out));
  record("matmul", y, {a, b}, [a, b, m, k, n](Grad g) {
    if (a.requires_grad()) kernels::gemm_nt({m, n, k}, g, b.values(), a.node()->grad_buffer());
    if (b.requires_grad()) kernels::gemm_tn({m, k, n}, a.values(), g, b.node()->grad_buffer());
  });
  return y;
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  for (const auto& p : parts) require_defined("concat_last", p);
  const Shape lead(parts[0].shape().begin(), parts[0].shape().end() - (parts[0].rank() ? 1 : 0));
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t w = last_dim("concat_last", p);
    if (!std::equal(lead.begin(), lead.end(), p.shape().begin()) || p.rank() != lead.size() + 1) {
      shape_error("concat_last", parts[0].shape(), p.shape());
    }
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = numel(lead);
  std::vector<double> out(rows * total);
  std::size_t col = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto pv = parts[i].values();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * widths[i]), widths[i],
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + col));
    col += widths[i];
  }
  Shape shape = lead;
  shape.push_back(total);
  Tensor y = result(std::move(shape), std::move(out));
  record("concat_last", y, parts, [parts, widths, rows, total](Grad g) {
    std::size_t col = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].requires_grad()) {
        auto gp = parts[i].node()->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[i]; ++c) gp[r * widths[i] + c] += g[r * total + col + c];
      }
      col += widths[i];
    }
  });
  return y;
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  for (const auto& p : parts) {
    require_defined("stack", p);
    if (p.shape() != parts[0].shape()) shape_error("stack", parts[0].shape(), p.shape());
  }
  const std::size_t inner = parts[0].numel();
  std::vector<double> out;
  out.reserve(inner * parts.size());
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Shape shape{parts.size()};
  shape.insert(shape.end(), parts[0].shape().begin(), parts[0].shape().end());
  Tensor y = result(std::move(shape), std::move(out));
  record("stack", y, parts, [parts, inner](Grad g) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!parts[i].requires_grad()) continue;
      auto gp = parts[i].node()->grad_buffer();
      for (std::size_t c = 0; c < inner; ++c) gp[c] += g[i * inner + c];
    }
  });
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined("reshape", x);
  if (numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  Tensor y = result(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()));
  record("reshape", y, {x}, [x](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
  return y;
}

Tensor pad_rows(const Tensor& x, std::size_t rows) {
  require_defined("pad_rows", x);
  if (x.rank() != 2 || rows < x.dim(0)) shape_error("pad_rows", x.shape(), Shape{rows});
  std::vector<double> out(rows * x.dim(1), 0.0);
  std::copy(x.values().begin(), x.values().end(), out.begin());
  Tensor y = result({rows, x.dim(1)}, std::move(out));
  record("pad_rows", y, {x}, [x](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
  return y;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_defined("gather_rows", x);
  if (x.rank() == 0) throw ShapeError("gather_rows: needs rank >= 1");
  const std::size_t n = x.dim(0);
  const std::size_t inner = n ? x.numel() / n : 0;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * inner);
  const auto xv = x.values();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(idx[r]) + " out of range for shape " +
                       to_string(x.shape()));
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(idx[r] * inner), inner,
                out.begin() + static_cast<std::ptrdiff_t>(r * inner));
  }
  Shape shape = x.shape();
  shape[0] = idx.size();
  Tensor y = result(std::move(shape), std::move(out));
  record("gather_rows", y, {x}, [x, idx, inner](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < inner; ++c) gx[idx[r] * inner + c] += g[r * inner + c];
  });
  return y;
}

Tensor where_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b) {
  require_defined("where_rows", a);
  require_defined("where_rows", b);
  if (a.shape() != b.shape() || a.rank() == 0 || a.dim(0) != take_a.size()) {
    shape_error("where_rows", a.shape(), b.shape());
  }
  const std::size_t rows = a.dim(0);
  const std::size_t inner = rows ? a.numel() / rows : 0;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto src = take_a[r] ? a.values() : b.values();
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * inner), inner,
                out.begin() + static_cast<std::ptrdiff_t>(r * inner));
  }
  Tensor y = result(a.shape(), std::move(out));
  record("where_rows", y, {a, b}, [take_a, a, b, rows, inner](Grad g) {
    for (std::size_t r = 0; r < rows; ++r) {
      const Tensor& t = take_a[r] ? a : b;
      if (!t.requires_grad()) continue;
      auto gt = t.node()->grad_buffer();
      for (std::size_t c = 0; c < inner; ++c) gt[r * inner + c] += g[r * inner + c];
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// activations

Tensor softmax_last(const Tensor& x) {
  require_defined("softmax_last", x);
  const std::size_t d = last_dim("softmax_last", x);
  const std::size_t rows = d ? x.numel() / d : 0;
  const auto xv = x.values();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double total = 0.0;
    for (std::size_t c = 0; c < d; ++c) total += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < d; ++c) yr[c] /= total;
  }
  Tensor y = result(x.shape(), std::move(out));
  record("softmax_last", y, {x}, [x, yn = y.node().get(), rows, d](Grad g) {
    auto gx = x.node()->grad_buffer();
    const auto& yv = yn->value;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += g[r * d + c] * yv[r * d + c];
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += yv[r * d + c] * (g[r * d + c] - dot);
    }
  });
  return y;
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      "gelu", x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor silu(const Tensor& x) {
  return unary(
      "silu", x, [](double v) { return v * sigmoid_value(v); },
      [](double v, double) {
        const double s = sigmoid_value(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  require_defined("log", x);
  for (double v : x.values()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softplus(const Tensor& x) {
  return unary("softplus", x, softplus_value, [](double v, double) { return sigmoid_value(v); });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      "clamp_min", x, [lo](double v) { return std::max(v, lo); },
      [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor y = result({}, {total});
  record("sum", y, {x}, [x](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (double& v : gx) v += g[0];
  });
  return y;
}

Tensor mean(const Tensor& x) {
  require_defined("mean", x);
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  double total = 0.0;
  for (double v : x.values()) total += v;
  const double n = static_cast<double>(x.numel());
  Tensor y = result({}, {total / n});
  record("mean", y, {x}, [x, n](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (double& v : gx) v += g[0] / n;
  });
  return y;
}

Tensor sum_last(const Tensor& x) {
  require_defined("sum_last", x);
  const std::size_t d = last_dim("sum_last", x);
  const std::size_t rows = d ? x.numel() / d : 0;
  const auto xv = x.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r] += xv[r * d + c];
  Tensor y = result(Shape(x.shape().begin(), x.shape().end() - 1), std::move(out));
  record("sum_last", y, {x}, [x, rows, d](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < d; ++c) gx[r * d + c] += g[r];
  });
  return y;
}

// ---------------------------------------------------------------------------
// normalization and regularization

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined("layer_norm", x);
  const std::size_t d = last_dim("layer_norm", x);
  if (gamma.shape() != Shape{d}) shape_error("layer_norm", x.shape(), gamma.shape());
  if (beta.shape() != Shape{d}) shape_error("layer_norm", x.shape(), beta.shape());
  const std::size_t rows = d ? x.numel() / d : 0;
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (xr[c] - mu) * is;
      (*xhat)[r * d + c] = h;
      out[r * d + c] = gv[c] * h + bv[c];
    }
  }
  Tensor y = result(x.shape(), std::move(out));
  record("layer_norm", y, {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, rows, d](Grad g) {
    const auto gv = gamma.values();
    if (gamma.requires_grad() || beta.requires_grad()) {
      auto gg = gamma.requires_grad() ? gamma.node()->grad_buffer() : std::span<double>{};
      auto gb = beta.requires_grad() ? beta.node()->grad_buffer() : std::span<double>{};
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          if (!gg.empty()) gg[c] += g[r * d + c] * (*xhat)[r * d + c];
          if (!gb.empty()) gb[c] += g[r * d + c];
        }
      }
    }
    if (x.requires_grad()) {
      auto gx = x.node()->grad_buffer();
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_dh = 0.0;
        double mean_dh_h = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double dh = g[r * d + c] * gv[c];
          mean_dh += dh;
          mean_dh_h += dh * (*xhat)[r * d + c];
        }
        mean_dh *= inv_d;
        mean_dh_h *= inv_d;
        for (std::size_t c = 0; c < d; ++c) {
          const double dh = g[r * d + c] * gv[c];
          gx[r * d + c] += (*inv_std)[r] * (dh - mean_dh - (*xhat)[r * d + c] * mean_dh_h);
        }
      }
    }
  });
  return y;
}

Tensor dropout(const Tensor& x, double rate, bool train, std::mt19937_64& rng) {
  require_defined("dropout", x);
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto mask = std::make_shared<std::vector<double>>(x.numel());
  for (double& m : *mask) m = unit(rng) < rate ? 0.0 : keep_scale;
  const auto xv = x.values();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * (*mask)[i];
  Tensor y = result(x.shape(), std::move(out));
  record("dropout", y, {x}, [x, mask](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
  return y;
}

// ---------------------------------------------------------------------------
// segment ops

Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> offsets) {
  require_defined("segment_softmax", scores);
  if (scores.rank() != 1) throw ShapeError("segment_softmax: scores must be rank 1, got " + to_string(scores.shape()));
  check_offsets("segment_softmax", offsets, scores.dim(0));
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const auto sv = scores.values();
  std::vector<double> out(sv.size());
  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
    if (off[s] == off[s + 1]) continue;
    const double mx = *std::max_element(sv.begin() + static_cast<std::ptrdiff_t>(off[s]),
                                        sv.begin() + static_cast<std::ptrdiff_t>(off[s + 1]));
    double total = 0.0;
    for (std::size_t t = off[s]; t < off[s + 1]; ++t) total += (out[t] = std::exp(sv[t] - mx));
    for (std::size_t t = off[s]; t < off[s + 1]; ++t) out[t] /= total;
  }
  Tensor y = result(scores.shape(), std::move(out));
  record("segment_softmax", y, {scores}, [scores, yn = y.node().get(), off](Grad g) {
    auto gx = scores.node()->grad_buffer();
    const auto& yv = yn->value;
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      double dot = 0.0;
      for (std::size_t t = off[s]; t < off[s + 1]; ++t) dot += g[t] * yv[t];
      for (std::size_t t = off[s]; t < off[s + 1]; ++t) gx[t] += yv[t] * (g[t] - dot);
    }
  });
  return y;
}

Tensor segment_weighted_sum(const Tensor& h, const Tensor& w, std::span<const std::size_t> offsets) {
  require_defined("segment_weighted_sum", h);
  require_defined("segment_weighted_sum", w);
  if (h.rank() != 2 || w.rank() != 1 || w.dim(0) != h.dim(0)) shape_error("segment_weighted_sum", h.shape(), w.shape());
  check_offsets("segment_weighted_sum", offsets, h.dim(0));
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t segs = off.size() - 1;
  const std::size_t d = h.dim(1);
  const auto hv = h.values();
  const auto wv = w.values();
  std::vector<double> out(segs * d, 0.0);
  for (std::size_t s = 0; s < segs; ++s)
    for (std::size_t t = off[s]; t < off[s + 1]; ++t)
      for (std::size_t c = 0; c < d; ++c) out[s * d + c] += wv[t] * hv[t * d + c];
  Tensor y = result({segs, d}, std::move(out));
  record("segment_weighted_sum", y, {h, w}, [h, w, off, d](Grad g) {
    const auto hv = h.values();
    const auto wv = w.values();
    auto gh = h.requires_grad() ? h.node()->grad_buffer() : std::span<double>{};
    auto gw = w.requires_grad() ? w.node()->grad_buffer() : std::span<double>{};
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      for (std::size_t t = off[s]; t < off[s + 1]; ++t) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          if (!gh.empty()) gh[t * d + c] += wv[t] * g[s * d + c];
          acc += g[s * d + c] * hv[t * d + c];
        }
        if (!gw.empty()) gw[t] += acc;
      }
    }
  });
  return y;
}

Tensor segment_mean(const Tensor& x, std::span<const std::size_t> offsets) {
  require_defined("segment_mean", x);
  if (x.rank() != 2) throw ShapeError("segment_mean: input must be rank 2, got " + to_string(x.shape()));
  check_offsets("segment_mean", offsets, x.dim(0));
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t segs = off.size() - 1;
  const std::size_t d = x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(segs * d, 0.0);
  for (std::size_t s = 0; s < segs; ++s) {
    const std::size_t len = off[s + 1] - off[s];
    if (len == 0) throw DataError("segment_mean: segment " + std::to_string(s) + " is empty");
    for (std::size_t t = off[s]; t < off[s + 1]; ++t)
      for (std::size_t c = 0; c < d; ++c) out[s * d + c] += xv[t * d + c];
    for (std::size_t c = 0; c < d; ++c) out[s * d + c] /= static_cast<double>(len);
  }
  Tensor y = result({segs, d}, std::move(out));
  record("segment_mean", y, {x}, [x, off, d](Grad g) {
    auto gx = x.node()->grad_buffer();
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(off[s + 1] - off[s]);
      for (std::size_t t = off[s]; t < off[s + 1]; ++t)
        for (std::size_t c = 0; c < d; ++c) gx[t * d + c] += g[s * d + c] * inv;
    }
  });
  return y;
}

Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::span<const std::size_t> offsets, std::size_t heads) {
  require_defined("segment_attention", q);
  if (q.rank() != 2 || k.shape() != q.shape()) shape_error("segment_attention", q.shape(), k.shape());
  if (v.shape() != q.shape()) shape_error("segment_attention", q.shape(), v.shape());
  const std::size_t width = q.dim(1);
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("segment_attention: width " + std::to_string(width) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  check_offsets("segment_attention", offsets, q.dim(0));
  auto off = std::make_shared<std::vector<std::size_t>>(offsets.begin(), offsets.end());
  const kernels::AttentionDims dims{width, heads};
  auto probs = std::make_shared<std::vector<double>>(kernels::attention_prob_size(*off, heads));
  std::vector<double> out(q.numel(), 0.0);
  kernels::segment_attention_forward(q.values(), k.values(), v.values(), *off, dims, *probs, out);
  Tensor y = result(q.shape(), std::move(out));
  record("segment_attention", y, {q, k, v}, [q, k, v, off, probs, dims](Grad g) {
    std::vector<double> dq(q.numel(), 0.0), dk(k.numel(), 0.0), dv(v.numel(), 0.0);
    kernels::segment_attention_backward(q.values(), k.values(), v.values(), *off, dims, *probs, g,
                                        dq, dk, dv);
    const auto accumulate = [](const Tensor& t, const std::vector<double>& d) {
      if (!t.requires_grad()) return;
      auto gt = t.node()->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) gt[i] += d[i];
    };
    accumulate(q, dq);
    accumulate(k, dk);
    accumulate(v, dv);
  });
  return y;
}

std::shared_ptr<const Adjacency> Adjacency::from_gather(Csr gather, std::size_t source_rows) {
  auto adj = std::make_shared<Adjacency>();
  Csr scatter;
  scatter.offsets.assign(source_rows + 1, 0);
  for (auto j : gather.indices) {
    if (j >= source_rows) throw ShapeError("Adjacency: source index " + std::to_string(j) + " out of range");
    ++scatter.offsets[j + 1];
  }
  for (std::size_t j = 0; j < source_rows; ++j) scatter.offsets[j + 1] += scatter.offsets[j];
  scatter.indices.resize(gather.indices.size());
  std::vector<std::size_t> cursor(scatter.offsets.begin(), scatter.offsets.end() - 1);
  for (std::size_t i = 0; i < gather.rows(); ++i)
    for (std::size_t e = gather.offsets[i]; e < gather.offsets[i + 1]; ++e)
      scatter.indices[cursor[gather.indices[e]]++] = i;
  adj->gather = std::move(gather);
  adj->scatter = std::move(scatter);
  adj->source_rows = source_rows;
  return adj;
}

Tensor neighbor_sum(const Tensor& x, std::shared_ptr<const Adjacency> adjacency) {
  require_defined("neighbor_sum", x);
  if (x.rank() != 2 || x.dim(0) != adjacency->source_rows) {
    shape_error("neighbor_sum", x.shape(), Shape{adjacency->source_rows});
  }
  const std::size_t d = x.dim(1);
  std::vector<double> out(adjacency->gather.rows() * d, 0.0);
  kernels::neighbor_sum(adjacency->gather, d, x.values(), out);
  Tensor y = result({adjacency->gather.rows(), d}, std::move(out));
  record("neighbor_sum", y, {x}, [x, adjacency, d](Grad g) {
    kernels::neighbor_sum(adjacency->scatter, d, g, x.node()->grad_buffer());
  });
  return y;
}

// ---------------------------------------------------------------------------
// losses

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_defined("cross_entropy", logits);
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    shape_error("cross_entropy", logits.shape(), Shape{targets.size()});
  }
  if (targets.empty()) throw DataError("cross_entropy: no targets");
  const std::size_t m = logits.dim(0);
  const std::size_t v = logits.dim(1);
  const auto lv = logits.values();
  auto probs = std::make_shared<std::vector<double>>(m * v);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (tgt[r] >= v) throw DomainError("cross_entropy: target " + std::to_string(tgt[r]) + " >= classes " + std::to_string(v));
    const double* lr = lv.data() + r * v;
    const double mx = *std::max_element(lr, lr + v);
    double z = 0.0;
    for (std::size_t c = 0; c < v; ++c) z += ((*probs)[r * v + c] = std::exp(lr[c] - mx));
    for (std::size_t c = 0; c < v; ++c) (*probs)[r * v + c] /= z;
    total += -(lr[tgt[r]] - mx - std::log(z));
  }
  Tensor y = result({}, {total / static_cast<double>(m)});
  record("cross_entropy", y, {logits}, [logits, probs, tgt, m, v](Grad g) {
    auto gl = logits.node()->grad_buffer();
    const double s = g[0] / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < v; ++c) gl[r * v + c] += s * (*probs)[r * v + c];
      gl[r * v + tgt[r]] -= s;
    }
  });
  return y;
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  require_defined("bce_with_logits", logits);
  if (logits.numel() != labels.size()) shape_error("bce_with_logits", logits.shape(), Shape{labels.size()});
  if (labels.empty()) throw DataError("bce_with_logits: no labels");
  std::vector<double> y_true(labels.begin(), labels.end());
  for (double l : y_true) {
    if (!(l >= 0.0 && l <= 1.0)) throw DomainError("bce_with_logits: label " + std::to_string(l) + " outside [0, 1]");
  }
  const auto xv = logits.values();
  const double n = static_cast<double>(y_true.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double x = xv[i];
    total += std::max(x, 0.0) - x * y_true[i] + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor y = result({}, {total / n});
  record("bce_with_logits", y, {logits}, [logits, y_true, n](Grad g) {
    const auto xv = logits.values();
    auto gl = logits.node()->grad_buffer();
    for (std::size_t i = 0; i < xv.size(); ++i) gl[i] += g[0] * (sigmoid_value(xv[i]) - y_true[i]) / n;
  });
  return y;
}

}  // namespace dghif::tc
