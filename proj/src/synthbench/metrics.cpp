#include "dghif/synthbench/metrics.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "dghif/common/errors.hpp"

namespace dghif::synth {

namespace {

double stddev(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

double structural_sensitivity(std::span<const double> scores, std::span<const int> labels,
                              std::span<const std::size_t> degrees, std::size_t k_low, std::size_t k_high,
                              double threshold) {
  if (scores.size() != labels.size() || scores.size() != degrees.size()) {
    throw DataError("structural_sensitivity: scores, labels and degrees differ in length");
  }
  if (k_low >= k_high) throw DomainError("structural_sensitivity: k_low must be below k_high");
  std::size_t low_pos = 0, low_hit = 0, high_pos = 0, high_hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    bool hit = scores[i] >= threshold;
    if (degrees[i] <= k_low) {
      ++low_pos;
      low_hit += hit;
    } else if (degrees[i] >= k_high) {
      ++high_pos;
      high_hit += hit;
    }
  }
  if (low_pos == 0) throw DataError(fmt::format("structural_sensitivity: low-degree band (k <= {}) has no positives", k_low));
  if (high_pos == 0) {
    throw DataError(fmt::format("structural_sensitivity: high-degree band (k >= {}) has no positives", k_high));
  }
  double low = static_cast<double>(low_hit) / static_cast<double>(low_pos);
  double high = static_cast<double>(high_hit) / static_cast<double>(high_pos);
  return std::abs(low - high) * 100.0;
}

double snr_db(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("snr_db: scores and labels differ in length");
  std::vector<double> risk, noise;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? risk : noise).push_back(scores[i]);
  if (risk.empty() || noise.empty()) throw DataError("snr_db: both classes must be present");
  double sigma_noise = stddev(noise);
  if (sigma_noise == 0.0) throw DomainError("snr_db: benign scores have zero spread");
  return 20.0 * std::log10(stddev(risk) / sigma_noise);
}

}  // namespace dghif::synth
