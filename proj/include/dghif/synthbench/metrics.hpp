#pragma once

#include <cstddef>
#include <span>

namespace dghif::synth {

inline constexpr std::size_t kLowDegree = 5;
inline constexpr std::size_t kHighDegree = 20;

/// |recall(degree <= k_low) - recall(degree >= k_high)| * 100 over positive
/// labels, predicting risk when score >= threshold. DataError naming the band
/// that holds no positive example.
double structural_sensitivity(std::span<const double> scores, std::span<const int> labels,
                              std::span<const std::size_t> degrees, std::size_t k_low = kLowDegree,
                              std::size_t k_high = kHighDegree, double threshold = 0.5);

/// 20 log10(sigma_risk / sigma_noise) with population standard deviations of
/// the scores of positive and negative examples. DataError when a class is
/// missing, DomainError when sigma_noise is zero.
double snr_db(std::span<const double> scores, std::span<const int> labels);

}  // namespace dghif::synth
