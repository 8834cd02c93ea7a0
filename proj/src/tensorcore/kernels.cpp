#include "dghif/tensorcore/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dghif::tc::kernels {

namespace {

constexpr std::size_t kParallelWork = 1 << 15;

std::vector<std::size_t> prob_bases(std::span<const std::size_t> offsets, std::size_t heads) {
  std::vector<std::size_t> bases(offsets.size(), 0);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t len = offsets[s + 1] - offsets[s];
    bases[s + 1] = bases[s] + len * len * heads;
  }
  return bases;
}

void attention_forward_segment(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::size_t begin, std::size_t len,
                               AttentionDims dims, double* probs, std::span<double> out) {
  const std::size_t dh = dims.width / dims.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < dims.heads; ++h) {
    const std::size_t col = h * dh;
    for (std::size_t i = 0; i < len; ++i) {
      double* p = probs + (h * len + i) * len;
      const double* qi = q.data() + (begin + i) * dims.width + col;
      double max_score = -INFINITY;
      for (std::size_t j = 0; j < len; ++j) {
        const double* kj = k.data() + (begin + j) * dims.width + col;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
        max_score = std::max(max_score, p[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        p[j] = std::exp(p[j] - max_score);
        total += p[j];
      }
      double* oi = out.data() + (begin + i) * dims.width + col;
      for (std::size_t c = 0; c < dh; ++c) oi[c] = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        p[j] /= total;
        const double* vj = v.data() + (begin + j) * dims.width + col;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
      }
    }
  }
}

void attention_backward_segment(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::size_t begin, std::size_t len,
                                AttentionDims dims, const double* probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv) {
  const std::size_t dh = dims.width / dims.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> dp(len);
  for (std::size_t h = 0; h < dims.heads; ++h) {
    const std::size_t col = h * dh;
    for (std::size_t i = 0; i < len; ++i) {
      const double* p = probs + (h * len + i) * len;
      const double* doi = dout.data() + (begin + i) * dims.width + col;
      double weighted = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double* vj = v.data() + (begin + j) * dims.width + col;
        double* dvj = dv.data() + (begin + j) * dims.width + col;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += doi[c] * vj[c];
          dvj[c] += p[j] * doi[c];
        }
        dp[j] = s;
        weighted += p[j] * s;
      }
      const double* qi = q.data() + (begin + i) * dims.width + col;
      double* dqi = dq.data() + (begin + i) * dims.width + col;
      for (std::size_t j = 0; j < len; ++j) {
        const double ds = p[j] * (dp[j] - weighted) * scale;
        const double* kj = k.data() + (begin + j) * dims.width + col;
        double* dkj = dk.data() + (begin + j) * dims.width + col;
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }
}

}  // namespace

std::size_t attention_prob_size(std::span<const std::size_t> offsets, std::size_t heads) {
  return prob_bases(offsets, heads).back();
}

// ---------------------------------------------------------------------------
// serial reference

namespace serial {

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < d.m; ++i) {
    for (std::size_t j = 0; j < d.n; ++j) {
      double acc = c[i * d.n + j];
      for (std::size_t p = 0; p < d.k; ++p) acc += a[i * d.k + p] * b[p * d.n + j];
      c[i * d.n + j] = acc;
    }
  }
}

void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
  for (std::size_t p = 0; p < d.k; ++p) {
    for (std::size_t j = 0; j < d.n; ++j) {
      double acc = c[p * d.n + j];
      for (std::size_t i = 0; i < d.m; ++i) acc += a[i * d.k + p] * b[i * d.n + j];
      c[p * d.n + j] = acc;
    }
  }
}

void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
  for (std::size_t i = 0; i < d.m; ++i) {
    for (std::size_t j = 0; j < d.n; ++j) {
      double acc = c[i * d.n + j];
      for (std::size_t p = 0; p < d.k; ++p) acc += a[i * d.k + p] * b[j * d.k + p];
      c[i * d.n + j] = acc;
    }
  }
}

void neighbor_sum(const Csr& gather, std::size_t width, std::span<const double> x,
                  std::span<double> out) {
  for (std::size_t i = 0; i < gather.rows(); ++i) {
    for (std::size_t e = gather.offsets[i]; e < gather.offsets[i + 1]; ++e) {
      const std::size_t j = gather.indices[e];
      for (std::size_t c = 0; c < width; ++c) out[i * width + c] += x[j * width + c];
    }
  }
}

void segment_attention_forward(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const std::size_t> offsets,
                               AttentionDims dims, std::span<double> probs, std::span<double> out) {
  const auto bases = prob_bases(offsets, dims.heads);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    attention_forward_segment(q, k, v, offsets[s], offsets[s + 1] - offsets[s], dims,
                              probs.data() + bases[s], out);
  }
}

void segment_attention_backward(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::span<const std::size_t> offsets,
                                AttentionDims dims, std::span<const double> probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv) {
  const auto bases = prob_bases(offsets, dims.heads);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    attention_backward_segment(q, k, v, offsets[s], offsets[s + 1] - offsets[s], dims,
                               probs.data() + bases[s], dout, dq, dk, dv);
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP

namespace parallel {

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  const auto m = static_cast<std::ptrdiff_t>(d.m);
#pragma omp parallel for schedule(static) if (d.m * d.k * d.n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * d.n;
    const double* ai = a.data() + i * d.k;
    for (std::size_t p = 0; p < d.k; ++p) {
      const double aip = ai[p];
      const double* bp = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
  const auto k = static_cast<std::ptrdiff_t>(d.k);
#pragma omp parallel for schedule(static) if (d.m * d.k * d.n >= kParallelWork)
  for (std::ptrdiff_t p = 0; p < k; ++p) {
    double* cp = c.data() + p * d.n;
    for (std::size_t i = 0; i < d.m; ++i) {
      const double aip = a[i * d.k + p];
      const double* bi = b.data() + i * d.n;
      for (std::size_t j = 0; j < d.n; ++j) cp[j] += aip * bi[j];
    }
  }
}

void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
  // Transpose b to [k, n] so the inner loop runs over contiguous memory.
  std::vector<double> bt(d.k * d.n);
  for (std::size_t j = 0; j < d.n; ++j)
    for (std::size_t p = 0; p < d.k; ++p) bt[p * d.n + j] = b[j * d.k + p];
  parallel::gemm(d, a, bt, c);
}

void neighbor_sum(const Csr& gather, std::size_t width, std::span<const double> x,
                  std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(gather.rows());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* oi = out.data() + i * width;
    for (std::size_t e = gather.offsets[i]; e < gather.offsets[i + 1]; ++e) {
      const double* xj = x.data() + gather.indices[e] * width;
      for (std::size_t c = 0; c < width; ++c) oi[c] += xj[c];
    }
  }
}

void segment_attention_forward(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const std::size_t> offsets,
                               AttentionDims dims, std::span<double> probs, std::span<double> out) {
  const auto bases = prob_bases(offsets, dims.heads);
  const auto segments = static_cast<std::ptrdiff_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t s = 0; s < segments; ++s) {
    attention_forward_segment(q, k, v, offsets[s], offsets[s + 1] - offsets[s], dims,
                              probs.data() + bases[s], out);
  }
}

void segment_attention_backward(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::span<const std::size_t> offsets,
                                AttentionDims dims, std::span<const double> probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv) {
  const auto bases = prob_bases(offsets, dims.heads);
  const auto segments = static_cast<std::ptrdiff_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t s = 0; s < segments; ++s) {
    attention_backward_segment(q, k, v, offsets[s], offsets[s + 1] - offsets[s], dims,
                               probs.data() + bases[s], dout, dq, dk, dv);
  }
}

}  // namespace parallel

// ---------------------------------------------------------------------------
// dispatch

bool openmp_enabled() noexcept {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {
bool go_parallel(std::size_t work) { return openmp_enabled() && max_threads() > 1 && work >= kParallelWork; }
}  // namespace

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c) {
  // The i-k-j loop in parallel::gemm is also the fastest single-threaded form.
  parallel::gemm(d, a, b, c);
}

void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
  parallel::gemm_tn(d, a, b, c);
}

void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b,
             std::span<double> c) {
  if (d.n * d.k < 16) {
    serial::gemm_nt(d, a, b, c);
    return;
  }
  parallel::gemm_nt(d, a, b, c);
}

void neighbor_sum(const Csr& gather, std::size_t width, std::span<const double> x,
                  std::span<double> out) {
  if (go_parallel(gather.indices.size() * width)) {
    parallel::neighbor_sum(gather, width, x, out);
  } else {
    serial::neighbor_sum(gather, width, x, out);
  }
}

void segment_attention_forward(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const std::size_t> offsets,
                               AttentionDims dims, std::span<double> probs, std::span<double> out) {
  if (go_parallel(probs.size() * dims.width / std::max<std::size_t>(dims.heads, 1))) {
    parallel::segment_attention_forward(q, k, v, offsets, dims, probs, out);
  } else {
    serial::segment_attention_forward(q, k, v, offsets, dims, probs, out);
  }
}

void segment_attention_backward(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::span<const std::size_t> offsets,
                                AttentionDims dims, std::span<const double> probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv) {
  if (go_parallel(probs.size() * dims.width / std::max<std::size_t>(dims.heads, 1))) {
    parallel::segment_attention_backward(q, k, v, offsets, dims, probs, dout, dq, dk, dv);
  } else {
    serial::segment_attention_backward(q, k, v, offsets, dims, probs, dout, dq, dk, dv);
  }
}

}  // namespace dghif::tc::kernels
