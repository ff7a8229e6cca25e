#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imda/arch/spec.hpp"
#include "imda/data/dataset.hpp"
#include "imda/train/trainer.hpp"

namespace imda::app {

class RunConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sectioned key = value file:
///
///   [run]      seed
///   [data]     root, mode, byte_width (auto or N), test_fraction
///   [network]  input_h, input_w, stem, stem_width, stm_count, branch_width,
///              squeeze_width, dilation_bc, dilation_de
///   [train]    epochs, batch_size, learning_rate, momentum, lr_decay, lr_step,
///              balance, early_stop_accuracy
///   [augment]  enabled, rotation_min, rotation_max, scale_min, scale_max,
///              shear_min, shear_max, reflect_probability, seed
///   [output]   dir, evaluate, svg
///
/// Every key is optional except data.root. augment.seed defaults to run.seed.
struct RunConfig {
  std::uint64_t seed = 42;
  std::filesystem::path data_root;
  data::InputMode mode = data::InputMode::images;
  std::optional<std::size_t> byte_width;
  double test_fraction = 0.2;
  arch::NetworkSpec network;
  train::TrainConfig train;
  double early_stop_accuracy = 0.0;  // stop once train-side infer accuracy reaches this; 0 disables
  std::filesystem::path out_dir = "run";
  bool evaluate = true;  // score the test side into out_dir/report after training
  bool svg = false;

  void validate() const;
};

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
};

/// Relative paths resolve against `base_dir`.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every setting, in file order.
std::vector<ConfigEntry> config_entries(const RunConfig& config);
std::string resolved_config_text(const RunConfig& config);
void write_resolved_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace imda::app
