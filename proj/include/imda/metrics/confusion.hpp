#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace imda::metrics {

/// Malware is the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ScoredSample {
  double score = 0.0;  // malware probability
  int label = 0;       // 1 = malware
};

std::vector<ScoredSample> zip_scores(std::span<const double> scores, std::span<const int> labels);

/// score >= threshold predicts malware.
ConfusionMatrix confusion(std::span<const ScoredSample> scored, double threshold);

/// `degenerate` marks a zero denominator; value is then 0.
struct Metric {
  double value = 0.0;
  bool degenerate = false;
};

Metric accuracy(const ConfusionMatrix& cm);  // percent
Metric precision(const ConfusionMatrix& cm);
Metric recall(const ConfusionMatrix& cm);
Metric f1(const ConfusionMatrix& cm);
Metric f1_from(double precision, double recall);
Metric mcc(const ConfusionMatrix& cm);

/// MCC with (fp + fn) in place of (tp + fn) in the denominator.
Metric mcc_printed_form(const ConfusionMatrix& cm);

struct ThresholdChoice {
  double threshold = 0.5;
  Metric mcc;
};

/// Threshold among the distinct scores that maximizes MCC; the lowest wins ties.
ThresholdChoice best_mcc_threshold(std::span<const ScoredSample> scored);

}  // namespace imda::metrics
