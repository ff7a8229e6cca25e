#include "imda/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "imda/app/run_config.hpp"
#include "imda/arch/model_io.hpp"
#include "imda/data/png_io.hpp"
#include "imda/metrics/audit.hpp"
#include "imda/rng.hpp"
#include "imda/train/split.hpp"

namespace imda::app {

namespace fs = std::filesystem;

namespace {

struct ConvertJob {
  fs::path source;
  fs::path relative;  // output path relative to the output root
  std::string label;
};

std::vector<ConvertJob> convert_jobs(const fs::path& in) {
  std::vector<ConvertJob> jobs;
  const bool labeled = fs::is_directory(in / "benign") || fs::is_directory(in / "malware");
  if (labeled) {
    for (const char* label : {"benign", "malware"}) {
      if (!fs::is_directory(in / label)) continue;
      for (const auto& p : data::list_class_files(in / label)) {
        jobs.push_back({p, fs::path(label) / (p.filename().string() + ".png"), label});
      }
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) jobs.push_back({p, p.filename().string() + ".png", "unlabeled"});
  }
  return jobs;
}

void print_metrics(const metrics::Report& report, std::ostream& out) {
  for (const auto& row : report.metrics) {
    out << "  " << row.name << ' ' << metrics::format_number(row.value) << (row.flag ? " (undefined)" : "") << '\n';
  }
}

std::vector<const data::ImageSample*> pointers(const data::Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<const data::ImageSample*> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(&ds.samples[i]);
  return out;
}

std::vector<std::string> paths_of(const data::Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<std::string> out;
  for (std::size_t i : indices) out.push_back(ds.manifest[i].path);
  return out;
}

std::vector<std::size_t> all_indices(const data::Dataset& ds) {
  std::vector<std::size_t> out(ds.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

void write_report(const train::Evaluation& eval, const std::vector<std::string>& paths, double threshold, bool svg,
                  const fs::path& dir, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto report = build_report(eval, paths, threshold, warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  metrics::export_report(report, dir, svg);
  out << "evaluated " << eval.scores.size() << " samples into " << dir.string() << '\n';
  print_metrics(report, out);
}

}  // namespace

metrics::Report build_report(const train::Evaluation& eval, const std::vector<std::string>& paths, double threshold,
                             std::vector<std::string>& warnings) {
  const auto scored = metrics::zip_scores(eval.scores, eval.labels);
  const auto cm = metrics::confusion(scored, threshold);
  metrics::Report report;
  std::optional<metrics::ThresholdChoice> best;
  try {
    report.roc = metrics::roc_curve(scored);
    report.pr = metrics::pr_curve(scored);
    best = metrics::best_mcc_threshold(scored);
  } catch (const metrics::CurveError& e) {
    report.roc.reset();
    report.pr.reset();
    warnings.emplace_back(std::string("no curves: ") + e.what());
  }
  report.metrics = metrics::metric_rows(cm, threshold, report.roc ? &*report.roc : nullptr,
                                        report.pr ? &*report.pr : nullptr, best ? &*best : nullptr);

  std::vector<std::vector<double>> features;
  for (const auto& f : eval.features) features.emplace_back(f.begin(), f.end());
  try {
    report.features = metrics::FeatureExport{paths, eval.labels, metrics::pca_project(features)};
  } catch (const metrics::PcaError& e) {
    warnings.emplace_back(std::string("no feature projection: ") + e.what());
  }
  return report;
}

int cmd_convert(const ConvertOptions& options, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(options.in)) {
    err << "error: input directory " << options.in.string() << " does not exist\n";
    return kInputError;
  }
  if (options.width && *options.width == 0) {
    err << "error: --width must be positive\n";
    return kInputError;
  }
  std::vector<ConvertJob> jobs;
  try {
    jobs = convert_jobs(options.in);
    fs::create_directories(options.out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  std::ofstream manifest(options.out / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!manifest) {
    err << "error: cannot write " << (options.out / "manifest.csv").string() << '\n';
    return kInputError;
  }
  manifest << "path,class,width,height,source\n";
  std::size_t failed = 0, written = 0;
  for (const auto& job : jobs) {
    try {
      auto bytes = data::read_file_bytes(job.source);
      auto image = data::bytes_to_image({std::move(bytes), data::Label::benign, job.source.string()}, options.width);
      if (options.resize > 0) image = data::resize(image, options.resize, options.resize);
      const fs::path target = options.out / job.relative;
      fs::create_directories(target.parent_path());
      data::write_png(target, image);
      manifest << job.relative.generic_string() << ',' << job.label << ',' << image.width << ',' << image.height
               << ',' << job.source.filename().string() << '\n';
      ++written;
    } catch (const std::exception& e) {
      err << "error: " << job.source.string() << ": " << e.what() << '\n';
      ++failed;
    }
  }
  manifest.flush();
  out << "converted " << written << " of " << jobs.size() << " files into " << options.out.string() << '\n';
  return failed == 0 && manifest ? kOk : kInputError;
}

int cmd_train(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config(config_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  for (const char* label : {"benign", "malware"}) {
    if (!fs::is_directory(config.data_root / label)) {
      err << "error: dataset root " << config.data_root.string() << " has no " << label << " directory\n";
      return kInputError;
    }
  }

  try {
    fs::create_directories(config.out_dir);
    write_resolved_config(config.out_dir / "resolved_config.ini", config);

    const auto& spec = config.network;
    const auto dataset =
        data::load_dataset(config.data_root, {config.mode, spec.input_h, spec.input_w, config.byte_width});
    for (const auto& w : dataset.warnings) err << "warning: " << w << '\n';
    const auto split = train::stratified_split(dataset, config.test_fraction, config.seed);
    train::write_split(config.out_dir / "split.csv", dataset, split);
    const auto train_idx = split.indices(train::Side::train);
    const auto test_idx = split.indices(train::Side::test);
    const auto train_set = pointers(dataset, train_idx);
    out << "dataset " << dataset.benign << " benign, " << dataset.malware << " malware; train " << train_idx.size()
        << ", test " << test_idx.size() << '\n';

    auto net = arch::build_imda<float>(spec);
    net.initialize(derive_seed(config.seed, {1}));

    auto on_epoch = [&](std::size_t epoch, arch::Network<float>& model) {
      out << "epoch " << epoch;
      bool stop = false;
      if (config.early_stop_accuracy > 0.0) {
        const double acc = train::accuracy_at(train::evaluate(model, train_set));
        out << " train_infer_acc " << metrics::format_number(acc);
        stop = acc >= config.early_stop_accuracy;
      }
      out << '\n' << std::flush;
      return stop;
    };

    train::TrainResult result;
    try {
      result = train::train(net, train_set, config.train, on_epoch);
    } catch (const train::DivergenceError& e) {
      err << "error: " << e.what() << '\n';
      return kDivergence;
    }
    arch::save_model(config.out_dir / "model.imda", net);
    train::write_train_log(config.out_dir / "train_log.csv", result.log, config.train.augmentation.seed);
    out << "trained " << result.epochs_run << " epochs" << (result.stopped_early ? " (stopped early)" : "")
        << "; model written to " << (config.out_dir / "model.imda").string() << '\n';

    if (config.evaluate && !test_idx.empty()) {
      const auto eval = train::evaluate(net, pointers(dataset, test_idx));
      write_report(eval, paths_of(dataset, test_idx), 0.5, config.svg, config.out_dir / "report", out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  if (!std::isfinite(options.threshold)) {
    err << "error: threshold must be finite\n";
    return kInputError;
  }
  if (options.subset != "all" && options.subset != "train" && options.subset != "test") {
    err << "error: --subset must be all, train or test\n";
    return kInputError;
  }
  if (options.subset != "all" && options.split.empty()) {
    err << "error: --subset " << options.subset << " needs --split\n";
    return kInputError;
  }
  try {
    auto net = arch::load_model(options.model);
    const auto& spec = net.spec();
    data::LoadOptions load{options.mode, options.resize, options.resize, options.byte_width};
    if (options.mode == data::InputMode::binaries) {
      load.resize_h = spec.input_h;
      load.resize_w = spec.input_w;
    }
    const auto dataset = data::load_dataset(options.data, load);
    for (const auto& w : dataset.warnings) err << "warning: " << w << '\n';

    std::vector<std::size_t> indices = all_indices(dataset);
    if (options.subset != "all") {
      const auto split = train::read_split(options.split, dataset);
      indices = split.indices(options.subset == "train" ? train::Side::train : train::Side::test);
      if (indices.empty()) throw std::runtime_error("the " + options.subset + " side of the split is empty");
    }
    for (std::size_t i : indices) {
      const auto& s = dataset.samples[i];
      if (s.height != spec.input_h || s.width != spec.input_w) {
        throw DimensionError("height", "shape mismatch: " + dataset.manifest[i].path + " is " +
                                           std::to_string(s.height) + "x" + std::to_string(s.width) +
                                           " but the model expects " + std::to_string(spec.input_h) + "x" +
                                           std::to_string(spec.input_w));
      }
    }

    fs::create_directories(options.out_dir);
    {
      std::ofstream cfg(options.out_dir / "resolved_config.ini", std::ios::binary | std::ios::trunc);
      cfg << "[eval]\nmodel = " << options.model.string() << "\ndata = " << options.data.string()
          << "\nthreshold = " << metrics::format_number(options.threshold) << "\nmode = " << data::to_string(options.mode)
          << "\nresize = " << options.resize << "\nbyte_width = "
          << (options.byte_width ? std::to_string(*options.byte_width) : "auto") << "\nsplit = " << options.split.string()
          << "\nsubset = " << options.subset << "\nsvg = " << (options.svg ? "true" : "false") << '\n';
      if (!cfg.flush()) throw std::runtime_error("cannot write resolved_config.ini");
    }
    const auto eval = train::evaluate(net, pointers(dataset, indices), options.batch_size);
    write_report(eval, paths_of(dataset, indices), options.threshold, options.svg, options.out_dir, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

int cmd_audit(const fs::path& table, std::ostream& out, std::ostream& err) {
  try {
    const auto result =
        metrics::is_metrics_csv(table) ? metrics::audit_metrics_csv(table) : metrics::audit_table(table);
    out << metrics::format_audit(result);
    return result.errors.empty() ? kOk : kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace imda::app
