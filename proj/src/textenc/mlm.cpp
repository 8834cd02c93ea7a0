#include "dghif/textenc/mlm.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"

namespace dghif::text {

MaskedBatch mask_tokens(std::span<const TokenSequence> batch, double mask_rate, std::mt19937_64& rng) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw DomainError("mask_rate must be in (0, 1), got " + std::to_string(mask_rate));
  }
  MaskedBatch out;
  out.input = pack(batch);
  std::vector<std::size_t> candidates;
  for (std::size_t r = 0; r < out.input.tokens(); ++r)
    if (!Vocab::is_special(out.input.ids[r])) candidates.push_back(r);
  if (candidates.empty()) return out;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(mask_rate * static_cast<double>(candidates.size()))));
  // Partial Fisher-Yates: the first `count` entries become a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(count);
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t r : candidates) {
    out.masked_rows.push_back(r);
    out.targets.push_back(out.input.ids[r]);
    out.input.ids[r] = kMask;
  }
  return out;
}

tc::Tensor mlm_loss(const MaskedBatch& batch, const EncoderParams& params, bool train, std::mt19937_64& rng) {
  if (batch.masked_rows.empty()) {
    spdlog::warn("masked-token batch has no maskable tokens; skipping");
    return tc::Tensor::scalar(0.0);
  }
  tc::Tensor h = encode_packed(batch.input, params, train, rng);
  tc::Tensor logits = tc::add(tc::matmul(tc::gather_rows(h, batch.masked_rows), params.mlm_w), params.mlm_b);
  return tc::cross_entropy(logits, batch.targets);
}

tc::Tensor mlm_pretrain_step(std::span<const TokenSequence> batch, const EncoderParams& params, double mask_rate,
                             std::mt19937_64& rng) {
  const MaskedBatch masked = mask_tokens(batch, mask_rate, rng);
  return mlm_loss(masked, params, true, rng);
}

}  // namespace dghif::text
