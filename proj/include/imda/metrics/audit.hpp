#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace imda::metrics {

/// One row of a comparison table: model, Acc %, F1, P, MCC, R, AUC-PR, AUC-ROC.
struct TableRow {
  std::size_t line = 0;
  std::string model;
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double mcc = 0.0;
  double recall = 0.0;
  double auc_pr = 0.0;
  double auc_roc = 0.0;
};

struct AuditFinding {
  TableRow row;
  double recomputed_f1 = 0.0;
  double delta = 0.0;
  bool f1_flag = false;
  std::vector<std::string> range_issues;

  bool flagged() const { return f1_flag || !range_issues.empty(); }
};

struct AuditResult {
  std::vector<AuditFinding> findings;
  std::vector<std::string> errors;  // malformed input, with line numbers

  std::size_t flagged() const;
};

/// Tab- or comma-separated, header line first.
AuditResult audit_table(std::istream& in, double tolerance = 1e-3);
AuditResult audit_table(const std::filesystem::path& path, double tolerance = 1e-3);

/// Checks a metrics.csv: f1 against 2PR/(P+R) and value ranges.
AuditResult audit_metrics_csv(const std::filesystem::path& path, double tolerance = 1e-3);

/// True when the file's first line is a metrics.csv header.
bool is_metrics_csv(const std::filesystem::path& path);

std::string format_audit(const AuditResult& result);

}  // namespace imda::metrics
