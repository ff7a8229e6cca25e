#include "imda/metrics/audit.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "imda/metrics/confusion.hpp"
#include "imda/metrics/report.hpp"

namespace imda::metrics {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

bool parse(const std::string& text, double& value) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(value);
}

void check_range(AuditFinding& f, const char* name, double value, double lo, double hi) {
  if (value < lo || value > hi) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "%s %.6g outside [%g, %g]", name, value, lo, hi);
    f.range_issues.emplace_back(msg);
  }
}

void check_f1(AuditFinding& f, double tolerance) {
  f.recomputed_f1 = f1_from(f.row.precision, f.row.recall).value;
  f.delta = std::abs(f.recomputed_f1 - f.row.f1);
  f.f1_flag = f.delta > tolerance;
}

}  // namespace

std::size_t AuditResult::flagged() const {
  std::size_t n = 0;
  for (const auto& f : findings) n += f.flagged() ? 1 : 0;
  return n;
}

AuditResult audit_table(std::istream& in, double tolerance) {
  AuditResult result;
  std::string line;
  std::size_t number = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto fields = split(line, delim);
    if (header) {
      header = false;
      if (fields.size() != 8) {
        result.errors.push_back("line " + std::to_string(number) + ": header needs 8 columns, got " +
                                std::to_string(fields.size()));
        return result;
      }
      continue;
    }
    if (fields.size() != 8) {
      result.errors.push_back("line " + std::to_string(number) + ": expected 8 fields, got " +
                              std::to_string(fields.size()));
      continue;
    }
    AuditFinding f;
    f.row.line = number;
    f.row.model = fields[0];
    double* targets[7] = {&f.row.accuracy, &f.row.f1,     &f.row.precision, &f.row.mcc,
                          &f.row.recall,   &f.row.auc_pr, &f.row.auc_roc};
    bool ok = !f.row.model.empty();
    for (std::size_t c = 0; c < 7 && ok; ++c) {
      if (!parse(fields[c + 1], *targets[c])) {
        result.errors.push_back("line " + std::to_string(number) + ": bad number '" + fields[c + 1] + "' in column " +
                                std::to_string(c + 2));
        ok = false;
      }
    }
    if (!ok) {
      if (f.row.model.empty()) result.errors.push_back("line " + std::to_string(number) + ": empty model name");
      continue;
    }
    check_f1(f, tolerance);
    check_range(f, "accuracy", f.row.accuracy, 0.0, 100.0);
    check_range(f, "f1", f.row.f1, 0.0, 1.0);
    check_range(f, "precision", f.row.precision, 0.0, 1.0);
    check_range(f, "mcc", f.row.mcc, -1.0, 1.0);
    check_range(f, "recall", f.row.recall, 0.0, 1.0);
    check_range(f, "auc_pr", f.row.auc_pr, 0.0, 1.0);
    check_range(f, "auc_roc", f.row.auc_roc, 0.0, 1.0);
    result.findings.push_back(std::move(f));
  }
  if (header) result.errors.emplace_back("table is empty");
  return result;
}

AuditResult audit_table(const fs::path& path, double tolerance) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return audit_table(in, tolerance);
}

bool is_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  return in && std::getline(in, line) && line == "metric,value,flag";
}

AuditResult audit_metrics_csv(const fs::path& path, double tolerance) {
  std::map<std::string, double> values;
  for (const auto& row : read_metrics_csv(path)) values[row.name] = row.value;
  AuditResult result;
  for (const char* key : {"precision", "recall", "f1"}) {
    if (!values.count(key)) result.errors.push_back(path.string() + ": missing metric " + key);
  }
  if (!result.errors.empty()) return result;

  AuditFinding f;
  f.row.model = path.filename().string();
  f.row.precision = values["precision"];
  f.row.recall = values["recall"];
  f.row.f1 = values["f1"];
  check_f1(f, tolerance);
  for (const auto& [name, value] : values) {
    if (name == "accuracy") {
      check_range(f, "accuracy", value, 0.0, 100.0);
    } else if (name == "mcc" || name == "best_mcc") {
      check_range(f, name.c_str(), value, -1.0, 1.0);
    } else if (name == "precision" || name == "recall" || name == "f1" || name == "auc_roc" || name == "auc_pr") {
      check_range(f, name.c_str(), value, 0.0, 1.0);
    }
  }
  result.findings.push_back(std::move(f));
  return result;
}

std::string format_audit(const AuditResult& result) {
  std::string out;
  char buf[256];
  for (const auto& e : result.errors) out += "error: " + e + "\n";
  for (const auto& f : result.findings) {
    std::snprintf(buf, sizeof buf, "%s line %zu %s: f1 %.6g recomputed %.6g delta %.3g\n",
                  f.flagged() ? "FLAG" : "ok  ", f.row.line, f.row.model.c_str(), f.row.f1, f.recomputed_f1,
                  f.delta);
    out += buf;
    for (const auto& issue : f.range_issues) out += "     range: " + issue + "\n";
  }
  std::snprintf(buf, sizeof buf, "%zu of %zu rows flagged, %zu malformed\n", result.flagged(), result.findings.size(),
                result.errors.size());
  out += buf;
  return out;
}

}  // namespace imda::metrics
