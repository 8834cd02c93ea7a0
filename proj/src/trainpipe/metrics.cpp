#include "dghif/trainpipe/metrics.hpp"

#include "dghif/common/errors.hpp"

namespace dghif::train {

ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                             double threshold, const std::vector<bool>& metaphor_flags) {
  if (scores.empty()) throw DataError("classification_metrics: empty input");
  if (scores.size() != labels.size()) throw DataError("classification_metrics: scores and labels differ in length");
  if (!metaphor_flags.empty() && metaphor_flags.size() != scores.size()) {
    throw DataError("classification_metrics: metaphor flags differ in length");
  }
  ClassificationMetrics m;
  std::size_t flagged = 0, flagged_correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++m.tp;
    if (pred && !pos) ++m.fp;
    if (!pred && pos) ++m.fn;
    if (!pred && !pos) ++m.tn;
    if (!metaphor_flags.empty() && metaphor_flags[i]) {
      ++flagged;
      flagged_correct += pred == pos;
    }
  }
  const auto tp = static_cast<double>(m.tp);
  m.precision_defined = m.tp + m.fp > 0;
  m.precision = m.precision_defined ? tp / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? tp / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  if (flagged > 0) m.metaphor_acc = static_cast<double>(flagged_correct) / static_cast<double>(flagged);
  return m;
}

bool EarlyStopping::update(std::size_t epoch, double score) {
  if (score > best_) {
    best_ = score;
    best_epoch_ = epoch;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

void EarlyStopping::restore(double best, std::size_t best_epoch, std::size_t since_best) {
  best_ = best;
  best_epoch_ = best_epoch;
  since_best_ = since_best;
}

}  // namespace dghif::train
