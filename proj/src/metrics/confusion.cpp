#include "imda/metrics/confusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace imda::metrics {

namespace {

using Wide = long double;

Metric ratio(Wide num, Wide den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num / den), false};
}

Metric correlation(const ConfusionMatrix& cm, Wide a, Wide b, Wide c, Wide d) {
  if (a == 0 || b == 0 || c == 0 || d == 0) return {0.0, true};
  const Wide num = static_cast<Wide>(cm.tp) * cm.tn - static_cast<Wide>(cm.fp) * cm.fn;
  // sqrt per pair keeps the product inside long double range for any 64-bit counts
  const Wide den = std::sqrt(a * b) * std::sqrt(c * d);
  return {static_cast<double>(num / den), false};
}

}  // namespace

std::vector<ScoredSample> zip_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::vector<ScoredSample> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], labels[i]};
  return out;
}

ConfusionMatrix confusion(std::span<const ScoredSample> scored, double threshold) {
  ConfusionMatrix cm;
  for (const auto& s : scored) {
    const bool predicted = s.score >= threshold;
    if (s.label == 1) {
      ++(predicted ? cm.tp : cm.fn);
    } else {
      ++(predicted ? cm.fp : cm.tn);
    }
  }
  return cm;
}

Metric accuracy(const ConfusionMatrix& cm) {
  return ratio((static_cast<Wide>(cm.tp) + cm.tn) * 100, static_cast<Wide>(cm.total()));
}

Metric precision(const ConfusionMatrix& cm) { return ratio(cm.tp, static_cast<Wide>(cm.tp) + cm.fp); }

Metric recall(const ConfusionMatrix& cm) { return ratio(cm.tp, static_cast<Wide>(cm.tp) + cm.fn); }

Metric f1(const ConfusionMatrix& cm) {
  const Metric p = precision(cm);
  const Metric r = recall(cm);
  if (p.degenerate || r.degenerate) return {0.0, true};
  const Wide pw = static_cast<Wide>(cm.tp) / (static_cast<Wide>(cm.tp) + cm.fp);
  const Wide rw = static_cast<Wide>(cm.tp) / (static_cast<Wide>(cm.tp) + cm.fn);
  return ratio(2 * pw * rw, pw + rw);
}

Metric f1_from(double p, double r) {
  const Wide pw = p;
  const Wide rw = r;
  return ratio(2 * pw * rw, pw + rw);
}

Metric mcc(const ConfusionMatrix& cm) {
  const Wide tp = cm.tp, tn = cm.tn, fp = cm.fp, fn = cm.fn;
  return correlation(cm, tp + fp, tp + fn, tn + fp, tn + fn);
}

Metric mcc_printed_form(const ConfusionMatrix& cm) {
  const Wide tp = cm.tp, tn = cm.tn, fp = cm.fp, fn = cm.fn;
  return correlation(cm, tp + fp, fp + fn, tn + fp, tn + fn);
}

ThresholdChoice best_mcc_threshold(std::span<const ScoredSample> scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
  ConfusionMatrix cm;
  for (const auto& s : scored) ++(s.label == 1 ? cm.fn : cm.tn);
  ThresholdChoice best{0.5, {0.0, true}};
  bool have = false;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scored[order[i]].score;
    for (; i < order.size() && scored[order[i]].score == t; ++i) {
      if (scored[order[i]].label == 1) {
        --cm.fn;
        ++cm.tp;
      } else {
        --cm.tn;
        ++cm.fp;
      }
    }
    const Metric m = mcc(cm);
    if (!have || m.value >= best.mcc.value) {
      best = {t, m};
      have = true;
    }
  }
  return best;
}

}  // namespace imda::metrics
