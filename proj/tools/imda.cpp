#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "imda/app/commands.hpp"

int main(int argc, char** argv) {
  using namespace imda;
  CLI::App app{"imda: grayscale-image malware detector"};
  app.require_subcommand(1);

  app::ConvertOptions convert;
  std::size_t width = 0;
  auto* c = app.add_subcommand("convert", "render binaries as grayscale PNGs");
  c->add_option("--in", convert.in, "directory of binaries (flat or benign/ + malware/)")->required();
  c->add_option("--out", convert.out, "output directory")->required();
  auto* width_opt = c->add_option("--width", width, "fixed image width in bytes");
  auto* auto_opt = c->add_flag("--auto-width", "pick the width from the file size (default)");
  width_opt->excludes(auto_opt);
  c->add_option("--resize", convert.resize, "resize to N x N after conversion");

  std::string config;
  auto* t = app.add_subcommand("train", "split, train and save a model");
  t->add_option("--config", config, "run configuration (INI)")->required()->check(CLI::ExistingFile);

  app::EvalOptions eval;
  std::string mode = "images";
  std::size_t byte_width = 0;
  auto* e = app.add_subcommand("eval", "score a dataset and export metrics, curves and PCA");
  e->add_option("--model", eval.model, "model file")->required()->check(CLI::ExistingFile);
  e->add_option("--data", eval.data, "dataset root with benign/ and malware/")->required();
  e->add_option("--threshold", eval.threshold, "decision threshold on the malware score")->capture_default_str();
  e->add_option("--out", eval.out_dir, "report directory")->capture_default_str();
  e->add_option("--mode", mode, "images or binaries")->check(CLI::IsMember({"images", "binaries"}));
  e->add_option("--resize", eval.resize, "resize images to N x N before scoring");
  e->add_option("--byte-width", byte_width, "fixed width for binaries mode");
  e->add_option("--split", eval.split, "split.csv from a training run");
  e->add_option("--subset", eval.subset, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
  e->add_flag("--svg", eval.svg, "also write roc.svg and pr.svg");

  std::string table;
  auto* a = app.add_subcommand("audit", "check a comparison table or metrics.csv for internal consistency");
  a->add_option("--table", table, "table file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : app::kInputError;
  }

  if (*c) {
    if (*width_opt) convert.width = width;
    return app::cmd_convert(convert, std::cout, std::cerr);
  }
  if (*t) return app::cmd_train(config, std::cout, std::cerr);
  if (*e) {
    eval.mode = mode == "binaries" ? data::InputMode::binaries : data::InputMode::images;
    if (byte_width > 0) eval.byte_width = byte_width;
    return app::cmd_eval(eval, std::cout, std::cerr);
  }
  return app::cmd_audit(table, std::cout, std::cerr);
}
