#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imda/metrics/confusion.hpp"
#include "imda/metrics/curves.hpp"
#include "imda/metrics/pca.hpp"

namespace imda::metrics {

struct MetricRow {
  std::string name;
  double value = 0.0;
  bool flag = false;
};

struct FeatureExport {
  std::vector<std::string> paths;
  std::vector<int> labels;
  PcaResult pca;
};

struct Report {
  std::vector<MetricRow> metrics;
  std::optional<CurveSeries> roc;
  std::optional<CurveSeries> pr;
  std::optional<FeatureExport> features;
};

/// Confusion counts, accuracy, precision, recall, f1, mcc, mcc_printed_form,
/// then the curve areas and MCC-maximizing threshold when curves are given.
std::vector<MetricRow> metric_rows(const ConfusionMatrix& cm, double threshold, const CurveSeries* roc = nullptr,
                                   const CurveSeries* pr = nullptr, const ThresholdChoice* best = nullptr);

/// Writes metrics.csv plus roc.csv, pr.csv and features_pca.csv for the parts
/// present. With `svg`, also roc.svg and pr.svg.
void export_report(const Report& report, const std::filesystem::path& out_dir, bool svg = false);

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

std::string format_number(double value);

}  // namespace imda::metrics
