#include "imda/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "imda/rng.hpp"
#include "imda/tensor/parallel.hpp"

namespace imda::train {

using arch::Mode;
using arch::Network;
using arch::ParamRef;
using data::ImageSample;
using data::Label;

const char* to_string(Balance balance) {
  return balance == Balance::oversample_minority ? "oversample_minority" : "none";
}

Balance parse_balance(std::string_view text) {
  if (text == "none") return Balance::none;
  if (text == "oversample_minority") return Balance::oversample_minority;
  throw std::invalid_argument("unknown balance policy '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("lr_decay must be positive");
  if (lr_step < 1) throw std::invalid_argument("lr_step must be at least 1");
  augmentation.validate();
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  return learning_rate * std::pow(lr_decay, static_cast<double>((epoch - 1) / lr_step));
}

void sgd_step(Network<float>& net, OptimizerState& state, double learning_rate, double momentum) {
  std::size_t k = 0;
  const bool fresh = state.velocity.empty();
  const auto lr = static_cast<float>(learning_rate);
  const auto mu = static_cast<float>(momentum);
  net.for_each_param([&](ParamRef<float> p) {
    if (fresh) state.velocity.emplace_back(p.value.size(), 0.0f);
    auto& v = state.velocity.at(k++);
    if (v.size() != p.value.size()) throw std::logic_error("optimizer state does not match parameter " + p.name);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = mu * v[i] + p.grad[i];
      p.value[i] -= lr * v[i];
    }
  });
  ++state.step;
}

DivergenceError::DivergenceError(std::size_t epoch, std::size_t batch, double loss)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch) + " (loss " + std::to_string(loss) +
                         "); lower the learning rate"),
      epoch_(epoch),
      batch_(batch) {}

Tensor<float> make_batch(std::span<const ImageSample* const> images, std::size_t height, std::size_t width) {
  Tensor<float> batch({images.size(), 1, height, width});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const ImageSample& img = *images[n];
    if (img.height != height || img.width != width) {
      throw DimensionError("height", "sample " + img.source_path + " is " + std::to_string(img.height) + "x" +
                                         std::to_string(img.width) + ", network expects " +
                                         std::to_string(height) + "x" + std::to_string(width));
    }
    float* dst = batch.plane(n, 0);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) dst[i] = data::normalize_pixel(img.pixels[i]);
  }
  return batch;
}

std::vector<std::size_t> epoch_order(std::span<const ImageSample* const> samples, const TrainConfig& config,
                                     std::size_t epoch) {
  Rng rng(derive_seed(config.seed, {epoch}));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (config.balance == Balance::oversample_minority) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < samples.size(); ++i) by_class[static_cast<int>(samples[i]->label)].push_back(i);
    const auto& small = by_class[0].size() < by_class[1].size() ? by_class[0] : by_class[1];
    const auto& large = by_class[0].size() < by_class[1].size() ? by_class[1] : by_class[0];
    if (!small.empty()) {
      for (std::size_t k = small.size(); k < large.size(); ++k) order.push_back(small[rng.below(small.size())]);
    }
  }
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

TrainResult train(Network<float>& net, std::span<const ImageSample* const> samples, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("training set is empty");
  const std::size_t h = net.spec().input_h, w = net.spec().input_w;
  OptimizerState state;
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.learning_rate_at(epoch);
    const auto order = epoch_order(samples, config, epoch);
    for (std::size_t start = 0, batch_index = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<ImageSample> augmented(count);
      const auto jobs = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static) num_threads(worker_count())
      for (std::ptrdiff_t k = 0; k < jobs; ++k) {
        const std::size_t position = start + static_cast<std::size_t>(k);
        augmented[static_cast<std::size_t>(k)] =
            data::augment(*samples[order[position]], config.augmentation, (std::uint64_t{epoch} << 32) | position);
      }
      std::vector<const ImageSample*> ptrs(count);
      std::vector<int> labels(count);
      for (std::size_t k = 0; k < count; ++k) {
        ptrs[k] = &augmented[k];
        labels[k] = static_cast<int>(augmented[k].label);
      }
      auto out = net.forward(make_batch(ptrs, h, w), Mode::train);
      auto ce = softmax_crossentropy<float>(out.logits, labels);
      if (!std::isfinite(ce.loss)) throw DivergenceError(epoch, batch_index, ce.loss);
      net.backward(ce.grad_logits);
      sgd_step(net, state, lr, config.momentum);
      net.clear_cache();

      std::size_t correct = 0;
      for (std::size_t k = 0; k < count; ++k) {
        const int predicted = out.probs(k, 1, 0, 0) >= 0.5f ? 1 : 0;
        correct += predicted == labels[k];
      }
      result.log.push_back({epoch, state.step, ce.loss, static_cast<double>(correct) / static_cast<double>(count), lr});
    }
    result.epochs_run = epoch;
    if (on_epoch && on_epoch(epoch, net)) {
      result.stopped_early = epoch < config.epochs;
      break;
    }
  }
  return result;
}

Evaluation evaluate(Network<float>& net, std::span<const ImageSample* const> samples, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  const std::size_t h = net.spec().input_h, w = net.spec().input_w;
  Evaluation eval;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    auto out = net.forward(make_batch(samples.subspan(start, count), h, w), Mode::infer);
    const std::size_t f = out.features.shape().c;
    for (std::size_t k = 0; k < count; ++k) {
      eval.scores.push_back(out.probs(k, 1, 0, 0));
      eval.labels.push_back(static_cast<int>(samples[start + k]->label));
      const float* feat = out.features.plane(k, 0);
      eval.features.emplace_back(feat, feat + f);
    }
  }
  return eval;
}

double accuracy_at(const Evaluation& eval, double threshold) {
  if (eval.scores.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < eval.scores.size(); ++i) correct += (eval.scores[i] >= threshold ? 1 : 0) == eval.labels[i];
  return static_cast<double>(correct) / static_cast<double>(eval.scores.size());
}

void write_train_log(const std::filesystem::path& path, const std::vector<StepLog>& log,
                     std::uint64_t augmentation_seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write training log " + path.string());
  out << "# augmentation_seed=" << augmentation_seed << '\n';
  out << "epoch,step,loss,train_acc,lr\n";
  out << std::setprecision(9);
  for (const auto& row : log) {
    out << row.epoch << ',' << row.step << ',' << row.loss << ',' << row.train_acc << ',' << row.lr << '\n';
  }
}

}  // namespace imda::train
