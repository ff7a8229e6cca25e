#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "imda/metrics/confusion.hpp"

namespace imda::metrics {

class CurveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class CurveKind { roc, pr };

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;  // fpr or recall
  double y = 0.0;  // tpr or precision
};

struct CurveSeries {
  CurveKind kind = CurveKind::roc;
  std::vector<CurvePoint> points;
  double area = 0.0;
};

/// Thresholds run from +inf down through every distinct score to -inf.
/// Tied scores move the curve in one step.
CurveSeries roc_curve(std::span<const ScoredSample> scored);

/// Starts at the highest-score group; the +inf point has no precision.
CurveSeries pr_curve(std::span<const ScoredSample> scored);

double trapezoid(const std::vector<CurvePoint>& points);

}  // namespace imda::metrics
