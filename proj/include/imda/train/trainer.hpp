#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "imda/arch/network.hpp"
#include "imda/data/augment.hpp"
#include "imda/data/image.hpp"

namespace imda::train {

enum class Balance { none, oversample_minority };

const char* to_string(Balance balance);
Balance parse_balance(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.5;
  std::size_t lr_step = 15;  // epochs between decays
  std::uint64_t seed = 42;
  data::AugmentSpec augmentation;
  Balance balance = Balance::oversample_minority;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const;
};

/// Velocity buffers in for_each_param order.
struct OptimizerState {
  std::vector<std::vector<float>> velocity;
  std::uint64_t step = 0;
};

/// v = momentum * v + g; p -= lr * v.
void sgd_step(arch::Network<float>& net, OptimizerState& state, double learning_rate, double momentum);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, double loss);
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step index
  double loss = 0.0;
  double train_acc = 0.0;  // fraction of the batch classified correctly
  double lr = 0.0;
};

struct TrainResult {
  std::vector<StepLog> log;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
};

/// Called after each epoch with the 1-based epoch number; returning true stops training.
using EpochCallback = std::function<bool(std::size_t epoch, arch::Network<float>& net)>;

/// Per epoch: order = samples (plus minority re-draws when balancing),
/// permuted by Rng(derive_seed(seed, {epoch})). The sample at position p is
/// augmented with draw seed (epoch << 32) | p.
std::vector<std::size_t> epoch_order(std::span<const data::ImageSample* const> samples, const TrainConfig& config,
                                     std::size_t epoch);

TrainResult train(arch::Network<float>& net, std::span<const data::ImageSample* const> samples,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Stacks images into an (N, 1, H, W) batch scaled to [0, 1].
Tensor<float> make_batch(std::span<const data::ImageSample* const> images, std::size_t height, std::size_t width);

struct Evaluation {
  std::vector<double> scores;  // malware probability, in input order
  std::vector<int> labels;
  std::vector<std::vector<float>> features;
};

Evaluation evaluate(arch::Network<float>& net, std::span<const data::ImageSample* const> samples,
                    std::size_t batch_size = 32);

/// Fraction of samples whose score lands on the correct side of `threshold`.
double accuracy_at(const Evaluation& eval, double threshold = 0.5);

/// CSV epoch,step,loss,train_acc,lr preceded by a "# augmentation_seed=" line.
void write_train_log(const std::filesystem::path& path, const std::vector<StepLog>& log,
                     std::uint64_t augmentation_seed);

}  // namespace imda::train
