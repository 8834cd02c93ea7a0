#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dghif::train {

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;      // false when nothing was predicted positive
  std::optional<double> metaphor_acc;  // absent when no example is metaphor-flagged
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Predicts positive when score >= threshold. An undefined precision (no
/// positive predictions) or recall (no positive labels) is reported as 0.
/// `metaphor_flags` may be empty. DataError on empty or mismatched input.
ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                             double threshold = 0.5, const std::vector<bool>& metaphor_flags = {});

/// Tracks the best validation score; signals a stop once `patience` epochs
/// pass without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience = 5) : patience_(patience) {}

  /// Records the score of a finished epoch (1-based). Returns true when
  /// training should stop.
  bool update(std::size_t epoch, double score);

  std::size_t patience() const noexcept { return patience_; }
  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  std::size_t since_best() const noexcept { return since_best_; }
  void restore(double best, std::size_t best_epoch, std::size_t since_best);

 private:
  std::size_t patience_;
  double best_ = -1.0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
};

}  // namespace dghif::train
