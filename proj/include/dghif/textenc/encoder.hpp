#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dghif/tensorcore/params.hpp"
#include "dghif/textenc/vocab.hpp"

namespace dghif::text {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 128;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn = 128;
  std::size_t attn_dim = 0;  // width of the risk-attention projection; 0 means hidden / 2
  double dropout = 0.2;

  std::size_t attention_width() const noexcept { return attn_dim ? attn_dim : hidden / 2; }
  void validate() const;
};

struct EncoderLayer {
  tc::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  tc::Tensor ln1_g, ln1_b;
  tc::Tensor w1, b1, w2, b2;
  tc::Tensor ln2_g, ln2_b;
};

/// Post-LN transformer encoder plus the risk-attention pooling parameters
/// (W_h, b_h, guide vector v) and a masked-token prediction head.
struct EncoderParams {
  EncoderConfig config;
  tc::Tensor tok_emb, pos_emb;
  tc::Tensor emb_ln_g, emb_ln_b;
  std::vector<EncoderLayer> layers;
  tc::Tensor w_h, b_h, guide;
  tc::Tensor mlm_w, mlm_b;

  static EncoderParams init(const EncoderConfig& config, std::mt19937_64& rng);

  /// Encoder and MLM head parameters in group "text"; pooling parameters in
  /// group "pool". With `guide_trainable` false the guide vector is omitted.
  tc::ParamList parameters(bool guide_trainable = true) const;
};

/// Real tokens of several sequences laid end to end. Sequence s occupies rows
/// [offsets[s], offsets[s+1]) and keeps its original positions.
struct PackedBatch {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> positions;
  std::vector<std::size_t> offsets{0};

  std::size_t sequences() const noexcept { return offsets.size() - 1; }
  std::size_t tokens() const noexcept { return ids.size(); }
};

PackedBatch pack(std::span<const TokenSequence> sequences);

/// Final-layer token states [T, hidden] for a packed batch. In train mode
/// dropout draws from `rng`.
tc::Tensor encode_packed(const PackedBatch& batch, const EncoderParams& params, bool train,
                         std::mt19937_64& rng);

/// Token states [max_len, hidden] for one sequence (eval mode). PAD rows are
/// zero and never enter attention.
tc::Tensor encode(const TokenSequence& seq, const EncoderParams& params);

struct PoolOutput {
  tc::Tensor t;       // [S, hidden] pooled text representations
  tc::Tensor scores;  // [T] e_k = v . GELU(W_h h_k + b_h)
  tc::Tensor alpha;   // [T] attention weights, summing to 1 per sequence
};

/// Risk-aware attention pooling over packed token states.
PoolOutput pool_packed(const tc::Tensor& h, std::span<const std::size_t> offsets, const EncoderParams& params);

struct SequencePool {
  tc::Tensor t;               // [hidden]
  std::vector<double> alpha;  // length max_len, zero on PAD
};

/// Pools padded states [L, hidden] over positions where mask is 1. Throws
/// DataError when every position is masked.
SequencePool risk_attention_pool(const tc::Tensor& h, std::span<const std::uint8_t> mask,
                                 const EncoderParams& params);

/// Pooled representations [P, hidden] of the given posts.
tc::Tensor encode_posts(std::span<const TokenSequence> posts, const EncoderParams& params, bool train,
                        std::mt19937_64& rng);

/// Mean of post vectors [P, hidden] -> [hidden]; DataError when P is 0.
tc::Tensor user_embedding(const tc::Tensor& posts);

/// Per-user means of post vectors grouped by offsets -> [U, hidden].
tc::Tensor user_embeddings(const tc::Tensor& posts, std::span<const std::size_t> post_offsets);

}  // namespace dghif::text
