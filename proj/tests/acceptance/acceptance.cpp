// Runs the acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance [criterion ...]   (default: 1 through 8)
// IMDA_CORPUS_ROOT, when set to a directory holding benign/ and malware/
// images, replaces the synthetic corpus in criterion 5.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "imda/app/commands.hpp"
#include "imda/arch/network.hpp"
#include "imda/data/augment.hpp"
#include "imda/data/png_io.hpp"
#include "imda/metrics/audit.hpp"
#include "imda/metrics/report.hpp"
#include "imda/rng.hpp"
#include "imda/train/split.hpp"
#include "imda/train/trainer.hpp"
#include "metric_oracles.hpp"
#include "synthetic_corpus.hpp"

using namespace imda;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "imda_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, double> read_metrics(const fs::path& p) {
  std::map<std::string, double> out;
  for (const auto& row : metrics::read_metrics_csv(p)) out[row.name] = row.value;
  return out;
}

// 1
Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto results = testing::run_gradient_suite(2024);
  const double elapsed = seconds_since(start);
  bool pass = elapsed < 120.0;
  double worst = 0.0;
  std::string failing;
  for (const auto& r : results) {
    worst = std::max(worst, r.worst);
    if (!(r.worst < 1e-4) || r.shapes < 5) {
      pass = false;
      failing += " " + r.op;
    }
  }
  pass = pass && results.size() >= 7;
  return {pass, fmt("%zu ops, >=5 shapes each, worst relative error %.2e, %.1f s%s%s", results.size(), worst, elapsed,
                    failing.empty() ? "" : "; failing:", failing.c_str())};
}

// 2
Outcome metric_oracles() {
  const auto cm = testing::sweep_confusion(1000, 8);
  const auto auc = testing::sweep_auc(500, 200, 9);
  const bool pass = cm.cases == 1000 && cm.worst < 1e-12 && auc.cases == 500 && auc.worst < 1e-9;
  return {pass, fmt("1000 matrices vs rational oracle: worst %.2e; 500 score sets vs pair count: worst %.2e", cm.worst,
                    auc.worst)};
}

// 3
std::size_t hand_tally(const arch::NetworkSpec& s) {
  auto conv = [](std::size_t k, std::size_t in, std::size_t out) { return k * k * in * out + out; };
  std::size_t total = 0, channels = 1;
  if (s.stem) {
    total += conv(3, 1, s.stem_width) + conv(3, s.stem_width, s.stem_width) + 4 * s.stem_width;
    channels = s.stem_width;
  }
  for (std::size_t d = 0; d < s.stm_count; ++d) {
    const std::size_t w = s.branch_width << d, q = s.squeeze_width << d;
    const std::size_t shallow = conv(3, channels, w) + 2 * w + conv(1, w, q) + 2 * q;
    total += 4 * shallow + 2 * (conv(3, w, w) + 2 * w);
    channels = 4 * q;
  }
  return total + channels * s.classes + s.classes;
}

Outcome architecture() {
  using K = arch::LayerKind;
  const std::map<arch::BlockId, std::vector<K>> table{
      {arch::BlockId::A, {K::conv3x3, K::batch_norm, K::relu, K::conv3x3, K::batch_norm, K::relu, K::max_pool}},
      {arch::BlockId::B, {K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::max_pool}},
      {arch::BlockId::C, {K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::avg_pool}},
      {arch::BlockId::D,
       {K::conv3x3, K::batch_norm, K::relu, K::avg_pool, K::conv3x3, K::batch_norm, K::relu, K::conv1x1,
        K::batch_norm, K::relu, K::max_pool}},
      {arch::BlockId::E,
       {K::conv3x3, K::batch_norm, K::relu, K::max_pool, K::conv3x3, K::batch_norm, K::relu, K::conv1x1,
        K::batch_norm, K::relu, K::avg_pool}},
  };
  std::vector<std::string> problems;
  auto kinds = [](const auto& block) {
    std::vector<K> out;
    for (const auto& layer : block.layers) out.push_back(layer.desc.kind);
    return out;
  };

  const arch::NetworkSpec spec;
  auto net = arch::build_imda<float>(spec);
  net.initialize(3);
  Tensor<float> x({1, 1, 128, 128});
  Rng rng(4);
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform());
  net.forward(x, arch::Mode::train);

  std::vector<std::size_t> trace{128};
  if (!net.stem() || net.stem()->id != arch::BlockId::A || kinds(*net.stem()) != table.at(arch::BlockId::A)) {
    problems.emplace_back("stem layer order");
  } else {
    trace.push_back(net.stem()->layers.back().out_shape.h);
  }
  const arch::BlockId order[4] = {arch::BlockId::B, arch::BlockId::C, arch::BlockId::D, arch::BlockId::E};
  std::vector<std::size_t> merged;
  for (const auto& row : net.describe()) {
    if (row.kind == "concat") merged.push_back(row.out_shape.c);
  }
  if (merged.size() != net.stms().size()) problems.emplace_back("merge rows");
  for (std::size_t s = 0; s < net.stms().size(); ++s) {
    const auto& stm = net.stms()[s];
    std::size_t channel_sum = 0;
    const Shape first = stm.branches[0].layers.back().out_shape;
    for (std::size_t b = 0; b < 4; ++b) {
      const auto& branch = stm.branches[b];
      if (branch.id != order[b] || kinds(branch) != table.at(order[b])) {
        problems.push_back(fmt("STM%zu branch %zu layer order", s + 1, b));
      }
      const Shape out = branch.layers.back().out_shape;
      if (out.h != first.h || out.w != first.w) problems.push_back(fmt("STM%zu branch spatial dims", s + 1));
      channel_sum += out.c;
    }
    if (s < merged.size() && merged[s] != channel_sum) problems.push_back(fmt("STM%zu merged channels", s + 1));
    trace.push_back(first.h);
  }
  if (trace != std::vector<std::size_t>{128, 64, 32, 16, 8}) problems.emplace_back("spatial trace");

  const auto rows = net.describe();
  const std::size_t row_sum = std::accumulate(rows.begin(), rows.end(), std::size_t{0},
                                              [](std::size_t acc, const arch::LayerRow& r) { return acc + r.params; });
  std::size_t visited = 0;
  net.for_each_param([&visited](arch::ParamRef<float> p) { visited += p.value.size(); });
  const std::size_t tally = hand_tally(spec);
  if (row_sum != tally || net.param_count() != tally || visited != tally) problems.emplace_back("parameter count");

  std::string trace_text;
  for (std::size_t t : trace) trace_text += (trace_text.empty() ? "" : "->") + std::to_string(t);
  std::string merged_text;
  for (std::size_t m : merged) merged_text += (merged_text.empty() ? "" : "/") + std::to_string(m);
  std::string detail = fmt("trace %s, merged channels %s, %zu parameters", trace_text.c_str(), merged_text.c_str(),
                           net.param_count());
  for (const auto& p : problems) detail += "; mismatch: " + p;
  return {problems.empty(), detail};
}

std::vector<const data::ImageSample*> pointers(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<const data::ImageSample*> out;
  for (std::size_t i : idx) out.push_back(&ds.samples[i]);
  return out;
}

// 4
Outcome overfit() {
  const auto start = Clock::now();
  const fs::path root = work_dir("overfit");
  testing::write_corpus(root, {16, 16, 128, 44});
  const auto ds = data::load_dataset(root);
  std::vector<std::size_t> all(ds.samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto samples = pointers(ds, all);

  const arch::NetworkSpec spec;
  auto net = arch::build_imda<float>(spec);
  net.initialize(derive_seed(42, {1}));
  train::TrainConfig config;
  config.epochs = 200;
  config.augmentation.enabled = false;  // memorize the fixed images
  double acc = 0.0;
  const auto result = train::train(net, samples, config, [&](std::size_t, arch::Network<float>& model) {
    acc = train::accuracy_at(train::evaluate(model, samples));
    return acc == 1.0;
  });
  const double elapsed = seconds_since(start);
  return {acc == 1.0 && elapsed < 600.0,
          fmt("%zu images at 128x128, default network and optimizer, no augmentation, train accuracy %.4f after %zu epochs, %.1f s", samples.size(), acc,
              result.epochs_run, elapsed)};
}

std::string desk_config(const fs::path& root, const fs::path& out, std::size_t extent, const std::string& extra) {
  return "[run]\nseed = 42\n[data]\nroot = " + root.string() + "\ntest_fraction = 0.2\n[network]\ninput_h = " +
         std::to_string(extent) + "\ninput_w = " + std::to_string(extent) + "\n" + extra + "[output]\ndir = " +
         out.string() + "\n";
}

int run_train(const fs::path& dir, const std::string& config, const fs::path& log) {
  const fs::path path = dir / "run.ini";
  std::ofstream(path) << config;
  std::ofstream out(log);
  return app::cmd_train(path, out, out);
}

// 5
Outcome desk_scale() {
  const auto start = Clock::now();
  const fs::path dir = work_dir("desk");
  fs::path root = testing::external_corpus();
  std::string source = "external corpus";
  if (root.empty()) {
    root = dir / "corpus";
    testing::write_corpus(root, {500, 500, 64, 2025});
    source = "synthetic corpus";
  }
  const int code = run_train(dir, desk_config(root, dir / "run", 64, "[train]\nepochs = 60\n[augment]\nenabled = false\n"), dir / "train.log");
  if (code != 0) return {false, fmt("training exited with %d, see %s", code, (dir / "train.log").c_str())};
  auto m = read_metrics(dir / "run" / "report" / "metrics.csv");
  const double acc = m["accuracy"] / 100.0, auc = m["auc_roc"];
  const double elapsed = seconds_since(start);
  return {acc >= 0.90 && auc >= 0.95 && elapsed < 7200.0,
          fmt("%s, 1000 images at 64x64, 60 epochs without augmentation, %g test samples: accuracy %.4f, AUC-ROC %.4f, %.0f s", source.c_str(),
              m["tp"] + m["tn"] + m["fp"] + m["fn"], acc, auc, elapsed)};
}

// 6
Outcome determinism() {
  const fs::path dir = work_dir("determinism");
  testing::write_corpus(dir / "corpus", {32, 32, 32, 6});
  const std::string extra = "stem_width = 8\nbranch_width = 8\nsqueeze_width = 4\n[train]\nepochs = 3\n";
  std::string models[2], reports[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path run_dir = dir / ("run" + std::to_string(run));
    fs::create_directories(run_dir);
    const int code = run_train(run_dir, desk_config(dir / "corpus", run_dir / "out", 32, extra), run_dir / "log");
    if (code != 0) return {false, fmt("run %d: training exited with %d", run, code)};
    app::EvalOptions eval;
    eval.model = run_dir / "out" / "model.imda";
    eval.data = dir / "corpus";
    eval.out_dir = run_dir / "eval";
    std::ofstream log(run_dir / "eval.log");
    if (app::cmd_eval(eval, log, log) != 0) return {false, fmt("run %d: eval failed", run)};
    models[run] = slurp(eval.model);
    reports[run] = slurp(eval.out_dir / "metrics.csv");
  }
  const bool pass = !models[0].empty() && models[0] == models[1] && !reports[0].empty() && reports[0] == reports[1];
  return {pass, fmt("two train+eval runs: model files %s (%zu bytes), metrics.csv %s",
                    models[0] == models[1] ? "identical" : "DIFFER", models[0].size(),
                    reports[0] == reports[1] ? "identical" : "DIFFER")};
}

// 7
Outcome pipeline() {
  Rng rng(77);
  std::size_t round_trip_fail = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::uint8_t> bytes(1 + rng.below(70'000));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    std::optional<std::size_t> width;
    if (rng.below(2)) width = 1 + rng.below(300);
    const auto img = data::bytes_to_image({bytes, data::Label::malware, "blob"}, width);
    if (data::image_bytes(img, bytes.size()) != bytes) ++round_trip_fail;
  }

  std::size_t split_fail = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t nb = 1 + rng.below(400), nm = 1 + rng.below(400);
    std::vector<std::string> paths;
    std::vector<data::Label> labels;
    for (std::size_t k = 0; k < nb + nm; ++k) {
      paths.push_back(fmt("f%zu_%llu", k, static_cast<unsigned long long>(rng.next())));
      labels.push_back(k < nb ? data::Label::benign : data::Label::malware);
    }
    const auto split = train::stratified_split(paths, labels, 0.2, rng.next());
    std::size_t test[2] = {0, 0};
    for (std::size_t k = 0; k < paths.size(); ++k) test[static_cast<int>(labels[k])] += split.sides[k] == train::Side::test;
    if (std::abs(static_cast<double>(test[0]) - 0.2 * nb) > 1.0 || std::abs(static_cast<double>(test[1]) - 0.2 * nm) > 1.0) {
      ++split_fail;
    }
  }

  std::size_t augment_fail = 0;
  for (int i = 0; i < 50; ++i) {
    data::ImageSample img;
    img.height = 1 + rng.below(64);
    img.width = 1 + rng.below(64);
    img.pixels.resize(img.height * img.width);
    for (auto& p : img.pixels) p = static_cast<float>(rng.below(256));
    if (data::apply_augment(img, data::AugmentParams{}).pixels != img.pixels) ++augment_fail;
  }
  return {round_trip_fail == 0 && split_fail == 0 && augment_fail == 0,
          fmt("byte round trip %zu/100 failed, 80/20 split outside +-1 in %zu/50, identity warp %zu/50 changed",
              round_trip_fail, split_fail, augment_fail)};
}

// 8
Outcome audit_fixture() {
  const fs::path table = fs::path(IMDA_SOURCE_DIR) / "data" / "published_comparison.tsv";
  const auto result = metrics::audit_table(table);
  std::set<std::string> expected, flagged;
  std::ifstream in(table);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> f;
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 8) continue;
    const long double p = std::stold(f[3]), r = std::stold(f[5]);
    if (std::fabs(2 * p * r / (p + r) - std::stold(f[2])) > 1e-3L) expected.insert(f[0]);
  }
  for (const auto& f : result.findings) {
    if (f.flagged()) flagged.insert(f.row.model);
  }
  const bool pass = result.errors.empty() && result.findings.size() == 10 && flagged == expected &&
                    flagged.count("Xception") && flagged.count("Proposed iMDA") && !flagged.count("VGG16");
  std::string names;
  for (const auto& n : flagged) names += (names.empty() ? "" : ", ") + n;
  return {pass, fmt("%zu rows, flagged: %s", result.findings.size(), names.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite}, {"metric oracles", metric_oracles}, {"architecture conformance", architecture},
      {"overfit sanity", overfit},        {"desk-scale training", desk_scale}, {"determinism", determinism},
      {"pipeline correctness", pipeline}, {"audit fixture", audit_fixture},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoul(argv[i]));
  if (selected.empty()) {
    for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(k);
  }
  int failures = 0;
  for (std::size_t k : selected) {
    if (k < 1 || k > criteria.size()) {
      std::cerr << "no criterion " << k << '\n';
      return 1;
    }
    Outcome o;
    try {
      o = criteria[k - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << k << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << criteria[k - 1].first << ": "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
