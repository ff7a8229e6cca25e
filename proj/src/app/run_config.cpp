#include "imda/app/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "imda/metrics/report.hpp"

namespace imda::app {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

using Setter = std::function<void(RunConfig&, const std::string&, const fs::path&)>;

std::uint64_t to_uint(const std::string& name, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw RunConfigError(name + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double to_double(const std::string& name, const std::string& text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw RunConfigError(name + ": expected a number, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& name, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw RunConfigError(name + ": expected true or false, got '" + text + "'");
}

fs::path to_path(const std::string& text, const fs::path& base) {
  const fs::path p(text);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::string num(double v) { return metrics::format_number(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

#define IMDA_UINT(field) [](RunConfig& c, const std::string& v, const fs::path&) { c.field = to_uint(#field, v); }
#define IMDA_DOUBLE(field) [](RunConfig& c, const std::string& v, const fs::path&) { c.field = to_double(#field, v); }
#define IMDA_BOOL(field) [](RunConfig& c, const std::string& v, const fs::path&) { c.field = to_bool(#field, v); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"run.seed", IMDA_UINT(seed)},
      {"data.root", [](RunConfig& c, const std::string& v, const fs::path& b) { c.data_root = to_path(v, b); }},
      {"data.mode",
       [](RunConfig& c, const std::string& v, const fs::path&) {
         try {
           c.mode = data::parse_input_mode(v);
         } catch (const std::exception& e) {
           throw RunConfigError(std::string("data.mode: ") + e.what());
         }
       }},
      {"data.byte_width",
       [](RunConfig& c, const std::string& v, const fs::path&) {
         if (v == "auto") {
           c.byte_width.reset();
         } else {
           c.byte_width = to_uint("byte_width", v);
         }
       }},
      {"data.test_fraction", IMDA_DOUBLE(test_fraction)},
      {"network.input_h", IMDA_UINT(network.input_h)},
      {"network.input_w", IMDA_UINT(network.input_w)},
      {"network.stem", IMDA_BOOL(network.stem)},
      {"network.stem_width", IMDA_UINT(network.stem_width)},
      {"network.stm_count", IMDA_UINT(network.stm_count)},
      {"network.branch_width", IMDA_UINT(network.branch_width)},
      {"network.squeeze_width", IMDA_UINT(network.squeeze_width)},
      {"network.dilation_bc", IMDA_UINT(network.dilation_bc)},
      {"network.dilation_de", IMDA_UINT(network.dilation_de)},
      {"train.epochs", IMDA_UINT(train.epochs)},
      {"train.batch_size", IMDA_UINT(train.batch_size)},
      {"train.learning_rate", IMDA_DOUBLE(train.learning_rate)},
      {"train.momentum", IMDA_DOUBLE(train.momentum)},
      {"train.lr_decay", IMDA_DOUBLE(train.lr_decay)},
      {"train.lr_step", IMDA_UINT(train.lr_step)},
      {"train.balance",
       [](RunConfig& c, const std::string& v, const fs::path&) {
         try {
           c.train.balance = train::parse_balance(v);
         } catch (const std::exception& e) {
           throw RunConfigError(std::string("train.balance: ") + e.what());
         }
       }},
      {"train.early_stop_accuracy", IMDA_DOUBLE(early_stop_accuracy)},
      {"augment.enabled", IMDA_BOOL(train.augmentation.enabled)},
      {"augment.rotation_min", IMDA_DOUBLE(train.augmentation.rotation_min)},
      {"augment.rotation_max", IMDA_DOUBLE(train.augmentation.rotation_max)},
      {"augment.scale_min", IMDA_DOUBLE(train.augmentation.scale_min)},
      {"augment.scale_max", IMDA_DOUBLE(train.augmentation.scale_max)},
      {"augment.shear_min", IMDA_DOUBLE(train.augmentation.shear_min)},
      {"augment.shear_max", IMDA_DOUBLE(train.augmentation.shear_max)},
      {"augment.reflect_probability", IMDA_DOUBLE(train.augmentation.reflect_probability)},
      {"augment.seed", IMDA_UINT(train.augmentation.seed)},
      {"output.dir", [](RunConfig& c, const std::string& v, const fs::path& b) { c.out_dir = to_path(v, b); }},
      {"output.evaluate", IMDA_BOOL(evaluate)},
      {"output.svg", IMDA_BOOL(svg)},
  };
  return table;
}

#undef IMDA_UINT
#undef IMDA_DOUBLE
#undef IMDA_BOOL

}  // namespace

void RunConfig::validate() const {
  if (data_root.empty()) throw RunConfigError("data.root is required");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw RunConfigError("data.test_fraction must be in [0, 1)");
  if (byte_width && *byte_width == 0) throw RunConfigError("data.byte_width must be positive");
  if (!(early_stop_accuracy >= 0.0 && early_stop_accuracy <= 1.0)) {
    throw RunConfigError("train.early_stop_accuracy must be in [0, 1]");
  }
  try {
    network.validate();
    train.validate();
  } catch (const std::exception& e) {
    throw RunConfigError(e.what());
  }
}

RunConfig parse_run_config(std::istream& in, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw RunConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  bool seed_given = false;
  for (const auto& [section, keys] : tree) {
    static const std::set<std::string> known{"run", "data", "network", "train", "augment", "output"};
    if (!known.count(section) || !keys.data().empty()) throw RunConfigError("unknown section or stray key " + section);
    for (const auto& [key, value] : keys) {
      const std::string name = section + "." + key;
      const auto it = setters().find(name);
      if (it == setters().end()) throw RunConfigError("unknown key " + name);
      it->second(config, value.data(), base_dir);
      seed_given = seed_given || name == "augment.seed";
    }
  }
  if (config.out_dir.is_relative()) config.out_dir = (base_dir / config.out_dir).lexically_normal();
  config.train.seed = config.seed;
  if (!seed_given) config.train.augmentation.seed = config.seed;
  config.validate();
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RunConfigError("cannot read config " + path.string());
  return parse_run_config(in, fs::absolute(path).parent_path());
}

std::vector<ConfigEntry> config_entries(const RunConfig& c) {
  const auto& n = c.network;
  const auto& t = c.train;
  const auto& a = t.augmentation;
  return {
      {"run", "seed", num(c.seed)},
      {"data", "root", c.data_root.string()},
      {"data", "mode", data::to_string(c.mode)},
      {"data", "byte_width", c.byte_width ? num(std::uint64_t{*c.byte_width}) : "auto"},
      {"data", "test_fraction", num(c.test_fraction)},
      {"network", "input_h", num(std::uint64_t{n.input_h})},
      {"network", "input_w", num(std::uint64_t{n.input_w})},
      {"network", "stem", flag(n.stem)},
      {"network", "stem_width", num(std::uint64_t{n.stem_width})},
      {"network", "stm_count", num(std::uint64_t{n.stm_count})},
      {"network", "branch_width", num(std::uint64_t{n.branch_width})},
      {"network", "squeeze_width", num(std::uint64_t{n.squeeze_width})},
      {"network", "dilation_bc", num(std::uint64_t{n.dilation_bc})},
      {"network", "dilation_de", num(std::uint64_t{n.dilation_de})},
      {"train", "epochs", num(std::uint64_t{t.epochs})},
      {"train", "batch_size", num(std::uint64_t{t.batch_size})},
      {"train", "learning_rate", num(t.learning_rate)},
      {"train", "momentum", num(t.momentum)},
      {"train", "lr_decay", num(t.lr_decay)},
      {"train", "lr_step", num(std::uint64_t{t.lr_step})},
      {"train", "balance", train::to_string(t.balance)},
      {"train", "early_stop_accuracy", num(c.early_stop_accuracy)},
      {"augment", "enabled", flag(a.enabled)},
      {"augment", "rotation_min", num(a.rotation_min)},
      {"augment", "rotation_max", num(a.rotation_max)},
      {"augment", "scale_min", num(a.scale_min)},
      {"augment", "scale_max", num(a.scale_max)},
      {"augment", "shear_min", num(a.shear_min)},
      {"augment", "shear_max", num(a.shear_max)},
      {"augment", "reflect_probability", num(a.reflect_probability)},
      {"augment", "seed", num(a.seed)},
      {"output", "dir", c.out_dir.string()},
      {"output", "evaluate", flag(c.evaluate)},
      {"output", "svg", flag(c.svg)},
  };
}

std::string resolved_config_text(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& e : config_entries(config)) {
    if (e.section != section) {
      if (!section.empty()) out << '\n';
      section = e.section;
      out << '[' << section << "]\n";
    }
    out << e.key << " = " << e.value << '\n';
  }
  return out.str();
}

void write_resolved_config(const fs::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << resolved_config_text(config);
  if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace imda::app
