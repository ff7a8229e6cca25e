#include "imda/metrics/curves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace imda::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Group {
  double score;
  std::uint64_t tp;  // cumulative counts at threshold = score
  std::uint64_t fp;
};

struct Sweep {
  std::vector<Group> groups;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

Sweep sweep(std::span<const ScoredSample> scored) {
  Sweep out;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw CurveError("curve needs finite scores");
    ++(s.label == 1 ? out.positives : out.negatives);
  }
  if (out.positives == 0 || out.negatives == 0) throw CurveError("curve needs both classes in the input");

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scored[order[i]].score;
    for (; i < order.size() && scored[order[i]].score == t; ++i) ++(scored[order[i]].label == 1 ? tp : fp);
    out.groups.push_back({t, tp, fp});
  }
  return out;
}

double frac(std::uint64_t a, std::uint64_t b) { return static_cast<double>(a) / static_cast<double>(b); }

}  // namespace

double trapezoid(const std::vector<CurvePoint>& points) {
  long double area = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += static_cast<long double>(points[i].x - points[i - 1].x) * (points[i].y + points[i - 1].y) / 2;
  }
  return static_cast<double>(area);
}

CurveSeries roc_curve(std::span<const ScoredSample> scored) {
  const Sweep s = sweep(scored);
  CurveSeries out{CurveKind::roc, {}, 0.0};
  out.points.push_back({kInf, 0.0, 0.0});
  for (const auto& g : s.groups) out.points.push_back({g.score, frac(g.fp, s.negatives), frac(g.tp, s.positives)});
  out.points.push_back({-kInf, 1.0, 1.0});
  out.area = trapezoid(out.points);
  return out;
}

CurveSeries pr_curve(std::span<const ScoredSample> scored) {
  const Sweep s = sweep(scored);
  CurveSeries out{CurveKind::pr, {}, 0.0};
  for (const auto& g : s.groups) {
    out.points.push_back({g.score, frac(g.tp, s.positives), frac(g.tp, g.tp + g.fp)});
  }
  out.points.push_back({-kInf, 1.0, frac(s.positives, s.positives + s.negatives)});
  out.area = trapezoid(out.points);
  return out;
}

}  // namespace imda::metrics
