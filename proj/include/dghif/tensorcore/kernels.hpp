#pragma once

// Dense and segmented compute kernels behind the tensor ops.
//
// `serial::` holds straightforward reference loops kept for testing and
// benchmarking. `parallel::` holds the OpenMP versions; each output element is
// produced by exactly one thread with a fixed accumulation order, so results
// do not depend on the thread count. The unqualified entry points dispatch to
// the parallel versions when OpenMP is available and the work is large enough.

#include <cstddef>
#include <span>

#include "dghif/tensorcore/ops.hpp"

namespace dghif::tc::kernels {

struct GemmDims {
  std::size_t m, k, n;
};

struct AttentionDims {
  std::size_t width;  // model width H
  std::size_t heads;
};

/// Number of attention-probability entries needed for a packed batch.
std::size_t attention_prob_size(std::span<const std::size_t> offsets, std::size_t heads);

namespace serial {
// c[m,n] += a[m,k] * b[k,n]
void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
// c[m,n] += a[m,k] * b[n,k]^T
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);

void neighbor_sum(const Csr& gather, std::size_t width, std::span<const double> x,
                  std::span<double> out);

void segment_attention_forward(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const std::size_t> offsets,
                               AttentionDims dims, std::span<double> probs, std::span<double> out);
void segment_attention_backward(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::span<const std::size_t> offsets,
                                AttentionDims dims, std::span<const double> probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv);
}  // namespace serial

namespace parallel {
void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);

void neighbor_sum(const Csr& gather, std::size_t width, std::span<const double> x,
                  std::span<double> out);

void segment_attention_forward(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const std::size_t> offsets,
                               AttentionDims dims, std::span<double> probs, std::span<double> out);
void segment_attention_backward(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::span<const std::size_t> offsets,
                                AttentionDims dims, std::span<const double> probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv);
}  // namespace parallel

bool openmp_enabled() noexcept;
int max_threads() noexcept;

void gemm(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_tn(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_nt(GemmDims d, std::span<const double> a, std::span<const double> b, std::span<double> c);
void neighbor_sum(const Csr& gather, std::size_t width, std::span<const double> x,
                  std::span<double> out);
void segment_attention_forward(std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const std::size_t> offsets,
                               AttentionDims dims, std::span<double> probs, std::span<double> out);
void segment_attention_backward(std::span<const double> q, std::span<const double> k,
                                std::span<const double> v, std::span<const std::size_t> offsets,
                                AttentionDims dims, std::span<const double> probs,
                                std::span<const double> dout, std::span<double> dq,
                                std::span<double> dk, std::span<double> dv);

}  // namespace dghif::tc::kernels
