#pragma once

#include <random>
#include <span>
#include <vector>

#include "dghif/textenc/encoder.hpp"

namespace dghif::text {

inline constexpr double kDefaultMaskRate = 0.15;

/// A packed batch with some regular tokens replaced by MASK.
struct MaskedBatch {
  PackedBatch input;
  std::vector<std::size_t> masked_rows;  // packed row indices that were masked
  std::vector<std::size_t> targets;      // original ids at those rows
};

/// Replaces round(mask_rate * n) of the n regular tokens (at least one when
/// n > 0) with MASK, choosing positions uniformly without replacement.
MaskedBatch mask_tokens(std::span<const TokenSequence> batch, double mask_rate, std::mt19937_64& rng);

/// Cross-entropy of the prediction head at the masked rows. Returns a zero
/// scalar (and logs a warning) when nothing could be masked.
tc::Tensor mlm_loss(const MaskedBatch& batch, const EncoderParams& params, bool train, std::mt19937_64& rng);

/// Masks the batch with `rng` and returns the loss; the caller runs backward.
tc::Tensor mlm_pretrain_step(std::span<const TokenSequence> batch, const EncoderParams& params,
                             double mask_rate, std::mt19937_64& rng);

}  // namespace dghif::text
