#include "imda/metrics/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace imda::metrics {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_curve(const CurveSeries& curve, const fs::path& path) {
  auto out = open_out(path);
  out << (curve.kind == CurveKind::roc ? "threshold,fpr,tpr\n" : "threshold,recall,precision\n");
  for (const auto& p : curve.points) {
    out << format_number(p.threshold) << ',' << format_number(p.x) << ',' << format_number(p.y) << '\n';
  }
  finish(out, path);
}

void write_svg(const CurveSeries& curve, const fs::path& path) {
  constexpr double kSize = 400.0;
  constexpr double kPad = 40.0;
  auto out = open_out(path);
  const bool roc = curve.kind == CurveKind::roc;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + 2 * kPad << "\" height=\"" << kSize + 2 * kPad
      << "\">\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (roc) {
    out << "<line x1=\"" << kPad << "\" y1=\"" << kPad + kSize << "\" x2=\"" << kPad + kSize << "\" y2=\"" << kPad
        << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"blue\" points=\"";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", kPad + p.x * kSize, kPad + (1.0 - p.y) * kSize);
    out << buf;
  }
  out << "\"/>\n";
  char caption[96];
  std::snprintf(caption, sizeof caption, "%s area %.4f", roc ? "ROC" : "PR", curve.area);
  out << "<text x=\"" << kPad << "\" y=\"" << kPad - 10 << "\" font-family=\"sans-serif\" font-size=\"14\">" << caption
      << "</text>\n";
  out << "<text x=\"" << kPad + kSize / 2 << "\" y=\"" << kSize + 2 * kPad - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << (roc ? "false positive rate" : "recall") << "</text>\n";
  out << "<text x=\"12\" y=\"" << kPad + kSize / 2 << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << (roc ? "TPR" : "P") << "</text>\n";
  out << "</svg>\n";
  finish(out, path);
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

std::vector<MetricRow> metric_rows(const ConfusionMatrix& cm, double threshold, const CurveSeries* roc,
                                   const CurveSeries* pr, const ThresholdChoice* best) {
  auto row = [](const char* name, Metric m) { return MetricRow{name, m.value, m.degenerate}; };
  std::vector<MetricRow> rows{
      {"tp", static_cast<double>(cm.tp), false},
      {"tn", static_cast<double>(cm.tn), false},
      {"fp", static_cast<double>(cm.fp), false},
      {"fn", static_cast<double>(cm.fn), false},
      {"threshold", threshold, false},
      row("accuracy", accuracy(cm)),
      row("precision", precision(cm)),
      row("recall", recall(cm)),
      row("f1", f1(cm)),
      row("mcc", mcc(cm)),
      row("mcc_printed_form", mcc_printed_form(cm)),
  };
  if (roc) rows.push_back({"auc_roc", roc->area, false});
  if (pr) rows.push_back({"auc_pr", pr->area, false});
  if (best) {
    rows.push_back({"best_mcc_threshold", best->threshold, false});
    rows.push_back(row("best_mcc", best->mcc));
  }
  return rows;
}

void export_report(const Report& report, const fs::path& out_dir, bool svg) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  const fs::path metrics_path = out_dir / "metrics.csv";
  auto out = open_out(metrics_path);
  out << "metric,value,flag\n";
  for (const auto& r : report.metrics) out << r.name << ',' << format_number(r.value) << ',' << (r.flag ? 1 : 0) << '\n';
  finish(out, metrics_path);

  if (report.roc) {
    write_curve(*report.roc, out_dir / "roc.csv");
    if (svg) write_svg(*report.roc, out_dir / "roc.svg");
  }
  if (report.pr) {
    write_curve(*report.pr, out_dir / "pr.csv");
    if (svg) write_svg(*report.pr, out_dir / "pr.svg");
  }
  if (report.features) {
    const auto& f = *report.features;
    const fs::path path = out_dir / "features_pca.csv";
    auto pca_out = open_out(path);
    pca_out << "sample_path,label,pc1,pc2\n";
    for (std::size_t i = 0; i < f.pca.coords.size(); ++i) {
      const auto& c = f.pca.coords[i];
      pca_out << csv_field(i < f.paths.size() ? f.paths[i] : std::string()) << ','
              << (i < f.labels.size() && f.labels[i] == 1 ? "malware" : "benign") << ',' << format_number(c.at(0))
              << ',' << format_number(c.size() > 1 ? c[1] : 0.0) << '\n';
    }
    finish(pca_out, path);
  }
}

std::vector<MetricRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "metric,value,flag") {
    throw std::runtime_error(path.string() + ": expected header metric,value,flag");
  }
  std::vector<MetricRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, value, flag;
    if (!std::getline(ss, name, ',') || !std::getline(ss, value, ',') || !std::getline(ss, flag)) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(number) + ": expected 3 fields");
    }
    MetricRow row{name, 0.0, flag == "1"};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), row.value);
    if (ec != std::errc() || ptr != value.data() + value.size() || (flag != "0" && flag != "1")) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(number) + ": malformed row");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace imda::metrics
