#include "dghif/textenc/encoder.hpp"

#include <cmath>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"

namespace dghif::text {

using tc::Tensor;

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return tc::add(tc::matmul(x, w), b); }

Tensor ones(std::size_t n) { return tc::Tensor::full({n}, 1.0, true); }
Tensor zeros(std::size_t n) { return tc::Tensor::zeros({n}, true); }

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size <= kNumSpecial) throw ConfigError("encoder: vocab_size must exceed the special tokens");
  if (max_len < 2) throw ConfigError("encoder: max_len must be at least 2");
  if (hidden == 0 || heads == 0 || hidden % heads != 0) {
    throw ConfigError("encoder: hidden (" + std::to_string(hidden) + ") must be a positive multiple of heads (" +
                      std::to_string(heads) + ")");
  }
  if (ffn == 0) throw ConfigError("encoder: ffn must be positive");
  if (attention_width() == 0) throw ConfigError("encoder: risk-attention width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must be in [0, 1)");
}

EncoderParams EncoderParams::init(const EncoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t h = config.hidden;
  EncoderParams p;
  p.config = config;
  p.tok_emb = tc::normal({config.vocab_size, h}, 0.1, rng);
  p.pos_emb = tc::normal({config.max_len, h}, 0.1, rng);
  p.emb_ln_g = ones(h);
  p.emb_ln_b = zeros(h);
  for (std::size_t l = 0; l < config.layers; ++l) {
    EncoderLayer layer;
    layer.wq = tc::xavier_uniform(h, h, rng);
    layer.bq = zeros(h);
    layer.wk = tc::xavier_uniform(h, h, rng);
    layer.bk = zeros(h);
    layer.wv = tc::xavier_uniform(h, h, rng);
    layer.bv = zeros(h);
    layer.wo = tc::xavier_uniform(h, h, rng);
    layer.bo = zeros(h);
    layer.ln1_g = ones(h);
    layer.ln1_b = zeros(h);
    layer.w1 = tc::xavier_uniform(h, config.ffn, rng);
    layer.b1 = zeros(config.ffn);
    layer.w2 = tc::xavier_uniform(config.ffn, h, rng);
    layer.b2 = zeros(h);
    layer.ln2_g = ones(h);
    layer.ln2_b = zeros(h);
    p.layers.push_back(std::move(layer));
  }
  const std::size_t a = config.attention_width();
  p.w_h = tc::xavier_uniform(h, a, rng);
  p.b_h = zeros(a);
  p.guide = tc::normal({a}, 1.0 / std::sqrt(static_cast<double>(a)), rng);
  p.mlm_w = tc::xavier_uniform(h, config.vocab_size, rng);
  p.mlm_b = zeros(config.vocab_size);
  return p;
}

tc::ParamList EncoderParams::parameters(bool guide_trainable) const {
  tc::ParamList out;
  const auto text = [&out](std::string name, const Tensor& t) { out.push_back({std::move(name), "text", t}); };
  text("enc.tok_emb", tok_emb);
  text("enc.pos_emb", pos_emb);
  text("enc.emb_ln_g", emb_ln_g);
  text("enc.emb_ln_b", emb_ln_b);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string pre = "enc.layer" + std::to_string(l) + ".";
    text(pre + "wq", L.wq);
    text(pre + "bq", L.bq);
    text(pre + "wk", L.wk);
    text(pre + "bk", L.bk);
    text(pre + "wv", L.wv);
    text(pre + "bv", L.bv);
    text(pre + "wo", L.wo);
    text(pre + "bo", L.bo);
    text(pre + "ln1_g", L.ln1_g);
    text(pre + "ln1_b", L.ln1_b);
    text(pre + "w1", L.w1);
    text(pre + "b1", L.b1);
    text(pre + "w2", L.w2);
    text(pre + "b2", L.b2);
    text(pre + "ln2_g", L.ln2_g);
    text(pre + "ln2_b", L.ln2_b);
  }
  text("enc.mlm_w", mlm_w);
  text("enc.mlm_b", mlm_b);
  out.push_back({"pool.w_h", "pool", w_h});
  out.push_back({"pool.b_h", "pool", b_h});
  if (guide_trainable) out.push_back({"pool.guide", "pool", guide});
  return out;
}

PackedBatch pack(std::span<const TokenSequence> sequences) {
  PackedBatch batch;
  for (const auto& seq : sequences) {
    if (seq.ids.size() != seq.mask.size()) throw ShapeError("pack: ids and mask lengths differ");
    for (std::size_t k = 0; k < seq.ids.size(); ++k) {
      if (!seq.mask[k]) continue;
      batch.ids.push_back(seq.ids[k]);
      batch.positions.push_back(k);
    }
    batch.offsets.push_back(batch.ids.size());
  }
  return batch;
}

Tensor encode_packed(const PackedBatch& batch, const EncoderParams& params, bool train, std::mt19937_64& rng) {
  const auto& cfg = params.config;
  for (std::size_t id : batch.ids) {
    if (id >= cfg.vocab_size) throw DataError("encode: token id " + std::to_string(id) + " >= vocab size");
  }
  for (std::size_t pos : batch.positions) {
    if (pos >= cfg.max_len) throw DataError("encode: position " + std::to_string(pos) + " >= max_len");
  }
  Tensor x = tc::add(tc::gather_rows(params.tok_emb, batch.ids), tc::gather_rows(params.pos_emb, batch.positions));
  x = tc::layer_norm(x, params.emb_ln_g, params.emb_ln_b);
  x = tc::dropout(x, cfg.dropout, train, rng);
  for (const auto& L : params.layers) {
    Tensor q = linear(x, L.wq, L.bq);
    Tensor k = linear(x, L.wk, L.bk);
    Tensor v = linear(x, L.wv, L.bv);
    Tensor a = linear(tc::segment_attention(q, k, v, batch.offsets, cfg.heads), L.wo, L.bo);
    x = tc::layer_norm(tc::add(x, tc::dropout(a, cfg.dropout, train, rng)), L.ln1_g, L.ln1_b);
    Tensor f = linear(tc::gelu(linear(x, L.w1, L.b1)), L.w2, L.b2);
    x = tc::layer_norm(tc::add(x, tc::dropout(f, cfg.dropout, train, rng)), L.ln2_g, L.ln2_b);
  }
  return x;
}

Tensor encode(const TokenSequence& seq, const EncoderParams& params) {
  if (seq.ids.size() != params.config.max_len) {
    throw ShapeError("encode: sequence length " + std::to_string(seq.ids.size()) + " != max_len " +
                     std::to_string(params.config.max_len));
  }
  std::mt19937_64 unused(0);
  const TokenSequence* one = &seq;
  const PackedBatch batch = pack({one, 1});
  Tensor h = encode_packed(batch, params, false, unused);
  // Scatter real rows back to their positions; PAD rows stay zero.
  const std::size_t hidden = params.config.hidden;
  std::vector<double> out(seq.ids.size() * hidden, 0.0);
  for (std::size_t r = 0; r < batch.tokens(); ++r)
    for (std::size_t c = 0; c < hidden; ++c) out[batch.positions[r] * hidden + c] = h.values()[r * hidden + c];
  return Tensor::from_values({seq.ids.size(), hidden}, std::move(out));
}

PoolOutput pool_packed(const Tensor& h, std::span<const std::size_t> offsets, const EncoderParams& params) {
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    if (offsets[s + 1] == offsets[s]) throw DataError("risk attention: sequence " + std::to_string(s) + " has no unmasked tokens");
  }
  PoolOutput out;
  out.scores = tc::matmul(tc::gelu(linear(h, params.w_h, params.b_h)), params.guide);
  out.alpha = tc::segment_softmax(out.scores, offsets);
  out.t = tc::segment_weighted_sum(h, out.alpha, offsets);
  return out;
}

SequencePool risk_attention_pool(const Tensor& h, std::span<const std::uint8_t> mask, const EncoderParams& params) {
  if (h.rank() != 2 || h.dim(0) != mask.size()) {
    throw ShapeError("risk attention: states " + tc::to_string(h.shape()) + " vs mask length " +
                     std::to_string(mask.size()));
  }
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) rows.push_back(k);
  if (rows.empty()) throw DataError("risk attention: every position is masked");
  const std::vector<std::size_t> offsets{0, rows.size()};
  PoolOutput pooled = pool_packed(tc::gather_rows(h, rows), offsets, params);
  SequencePool out;
  out.t = tc::reshape(pooled.t, {h.dim(1)});
  out.alpha.assign(mask.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) out.alpha[rows[r]] = pooled.alpha.values()[r];
  return out;
}

Tensor encode_posts(std::span<const TokenSequence> posts, const EncoderParams& params, bool train,
                    std::mt19937_64& rng) {
  const PackedBatch batch = pack(posts);
  return pool_packed(encode_packed(batch, params, train, rng), batch.offsets, params).t;
}

Tensor user_embedding(const Tensor& posts) {
  if (posts.rank() != 2) throw ShapeError("user embedding: posts must be [P, hidden], got " + tc::to_string(posts.shape()));
  if (posts.dim(0) == 0) throw DataError("user embedding: user has no posts");
  const std::vector<std::size_t> offsets{0, posts.dim(0)};
  return tc::reshape(tc::segment_mean(posts, offsets), {posts.dim(1)});
}

Tensor user_embeddings(const Tensor& posts, std::span<const std::size_t> post_offsets) {
  return tc::segment_mean(posts, post_offsets);
}

}  // namespace dghif::text
