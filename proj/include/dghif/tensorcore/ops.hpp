#pragma once

// Differentiable primitives. Every op computes its forward value eagerly and,
// when a tape is active and some input requires a gradient, appends a record
// whose backward rule accumulates into the inputs' gradients.
//
// Broadcasting: only leading-batch broadcasting is supported. For the binary
// elementwise ops one operand may have a shape equal to the trailing dims of
// the other (e.g. [N, d] + [d]); any other mismatch is a ShapeError.

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "dghif/tensorcore/tensor.hpp"

namespace dghif::tc {

inline constexpr double kLayerNormEps = 1e-5;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError when any divisor element is zero.
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
/// x * s for a one-element tensor s (gradient flows into s).
Tensor scale_by(const Tensor& x, const Tensor& s);
/// Multiplies row i of x ([N, ...]) by s[i] (s has shape [N]).
Tensor scale_rows(const Tensor& x, const Tensor& s);

/// [..., m, k] x [k, n] -> [..., m, n]; a rank-1 right operand [k] gives [..., m].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor concat_last(const std::vector<Tensor>& parts);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);
/// Appends zero rows so that x ([n, d]) becomes [rows, d].
Tensor pad_rows(const Tensor& x, std::size_t rows);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Row i of the result is a[i] where take_a[i], else b[i].
Tensor where_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b);

Tensor softmax_last(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Exact Gaussian-CDF form: x * Phi(x).
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor exp(const Tensor& x);
/// Throws DomainError on any non-positive element.
Tensor log(const Tensor& x);
Tensor softplus(const Tensor& x);
/// max(x, lo) elementwise; the gradient is zero where the clamp is active.
Tensor clamp_min(const Tensor& x, double lo);

/// Reductions to a rank-0 scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sum over the last axis: [..., d] -> [...].
Tensor sum_last(const Tensor& x);

/// Per-row normalization over the last axis with learnable scale and shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

/// Inverted dropout: train mode zeroes with probability `rate` and scales the
/// survivors by 1/(1-rate); eval mode returns x unchanged.
Tensor dropout(const Tensor& x, double rate, bool train, std::mt19937_64& rng);

// Segment ops over packed sequences. `offsets` has S+1 nondecreasing entries;
// segment s covers rows [offsets[s], offsets[s+1]).

/// Softmax of scores [T] within each segment.
Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> offsets);
/// out[s] = sum_{t in s} w[t] * h[t]  (h: [T, d], w: [T]) -> [S, d].
Tensor segment_weighted_sum(const Tensor& h, const Tensor& w, std::span<const std::size_t> offsets);
/// Mean of the rows of each segment; empty segments are a DataError.
Tensor segment_mean(const Tensor& x, std::span<const std::size_t> offsets);
/// Multi-head scaled dot-product self-attention restricted to each segment.
/// q, k, v: [T, H] with H divisible by `heads`.
Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                         std::span<const std::size_t> offsets, std::size_t heads);

/// Compressed sparse rows. Row i lists indices[offsets[i] .. offsets[i+1]).
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;
  std::size_t rows() const noexcept { return offsets.size() - 1; }
  std::size_t row_size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

/// A sparse 0/1 aggregation matrix stored in both orientations so that the
/// forward gather and the backward gather are both race-free.
struct Adjacency {
  Csr gather;   // gather.rows() == output rows; entries are source rows
  Csr scatter;  // transpose of gather
  std::size_t source_rows = 0;

  static std::shared_ptr<const Adjacency> from_gather(Csr gather, std::size_t source_rows);
};

/// out[i] = sum_{j in gather[i]} x[j]   (x: [source_rows, d]).
Tensor neighbor_sum(const Tensor& x, std::shared_ptr<const Adjacency> adjacency);

/// Mean softmax cross-entropy of logits [M, V] against class ids.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
/// Mean binary cross-entropy of sigmoid(logits) against labels, computed in
/// the numerically stable logit form. logits must have exactly labels.size()
/// elements.
Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels);

}  // namespace dghif::tc
