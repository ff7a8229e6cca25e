#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "imda/data/dataset.hpp"
#include "imda/metrics/report.hpp"
#include "imda/train/trainer.hpp"

namespace imda::app {

enum ExitCode : int { kOk = 0, kInputError = 1, kDivergence = 2 };

struct ConvertOptions {
  std::filesystem::path in;
  std::filesystem::path out;
  std::optional<std::size_t> width;  // empty: width table
  std::size_t resize = 0;            // square output extent; 0 keeps the natural shape
};

/// Renders every file of `in` (or of in/benign and in/malware when present)
/// as a PNG under `out` with the same relative layout, plus out/manifest.csv.
int cmd_convert(const ConvertOptions& options, std::ostream& out, std::ostream& err);

/// Split, train, save. Writes resolved_config.ini, split.csv, train_log.csv
/// and model.imda into the configured output directory, and scores the test
/// side into report/ when output.evaluate is set.
int cmd_train(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path out_dir = "report";
  double threshold = 0.5;
  data::InputMode mode = data::InputMode::images;
  std::size_t resize = 0;  // images: 0 keeps stored extents; binaries always match the model
  std::optional<std::size_t> byte_width;
  std::filesystem::path split;  // split.csv from a training run
  std::string subset = "all";   // all, train or test
  bool svg = false;
  std::size_t batch_size = 32;
};

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

/// Comparison table (TSV/CSV) or metrics.csv. Findings never change the exit
/// code; unreadable or malformed input does.
int cmd_audit(const std::filesystem::path& table, std::ostream& out, std::ostream& err);

/// Metrics, curves and PCA for one evaluation. Curves are left out for
/// single-class input and PCA for fewer than two samples; `warnings` says so.
metrics::Report build_report(const train::Evaluation& eval, const std::vector<std::string>& paths, double threshold,
                             std::vector<std::string>& warnings);

}  // namespace imda::app
