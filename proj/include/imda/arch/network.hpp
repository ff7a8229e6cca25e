#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imda/arch/spec.hpp"
#include "imda/tensor/ops.hpp"

namespace imda::arch {

enum class Mode { train, infer };

/// One instantiated layer of a block with its parameters, gradient buffers
/// and (in train mode) the cached input needed for backward.
template <typename T>
struct Layer {
  LayerDesc desc;
  Shape out_shape;  // per sample (n = 1)
  ConvSpec<T> conv;
  BatchNormSpec<T> bn;
  Tensor<T> grad_w;
  std::vector<T> grad_b;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;
  Tensor<T> input;

  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool record);
  Tensor<T> backward(const Tensor<T>& upstream);
  std::size_t param_count() const noexcept;
};

template <typename T>
struct Block {
  BlockId id = BlockId::A;
  std::vector<Layer<T>> layers;

  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool record);
  Tensor<T> backward(const Tensor<T>& upstream);
};

template <typename T>
struct Stm {
  std::array<Block<T>, 4> branches;
  std::array<std::size_t, 4> widths{};
  Shape in_shape;

  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool record);
  Tensor<T> backward(const Tensor<T>& upstream);
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;    // (N, classes, 1, 1)
  Tensor<T> probs;     // (N, classes, 1, 1)
  Tensor<T> features;  // (N, F, 1, 1) after global average pooling
};

/// One row of the layer table printed by `describe`.
struct LayerRow {
  std::string block;  // "A", "STM1/B", ..., "head"
  std::string kind;
  Shape out_shape;
  std::size_t params = 0;
};

/// A parameter-bearing buffer in declaration order. `grad` is empty for
/// non-trainable state (batch-norm running statistics).
template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
};

template <typename T>
class Network {
 public:
  Network() = default;

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::optional<Block<T>>& stem() noexcept { return stem_; }
  const std::optional<Block<T>>& stem() const noexcept { return stem_; }
  std::vector<Stm<T>>& stms() noexcept { return stms_; }
  const std::vector<Stm<T>>& stms() const noexcept { return stms_; }
  DenseSpec<T>& head() noexcept { return head_; }
  const DenseSpec<T>& head() const noexcept { return head_; }

  /// Runs the network on a (N, 1, H, W) batch. Train mode uses and updates
  /// batch-norm batch statistics and records inputs for `backward`.
  ForwardResult<T> forward(const Tensor<T>& batch, Mode mode);

  /// Backpropagates d(loss)/d(logits) from the last train-mode forward and
  /// overwrites every parameter gradient. Returns d(loss)/d(input).
  Tensor<T> backward(const Tensor<T>& grad_logits);

  /// Drops activations cached by the last train-mode forward.
  void clear_cache();

  /// Visits trainable parameters (weights, biases, gamma, beta) in
  /// declaration order.
  void for_each_param(const std::function<void(ParamRef<T>)>& visit);
  /// Visits every stored buffer, including running statistics, in the order
  /// used by the model file.
  void for_each_buffer(const std::function<void(ParamRef<T>)>& visit);

  /// He-normal conv/dense weights, zero biases, gamma 1, beta 0.
  void initialize(std::uint64_t seed);

  std::size_t param_count() const;
  std::vector<LayerRow> describe() const;

  /// Marks batch-norm running statistics as initialized (after loading).
  void mark_stats_initialized();

  template <typename U>
  friend Network<U> build_network(const NetworkSpec&, const std::optional<BlockSpec>&,
                                  const std::vector<StmSpec>&);

 private:
  NetworkSpec spec_;
  std::optional<Block<T>> stem_;
  std::vector<Stm<T>> stms_;
  DenseSpec<T> head_;
  std::vector<T> head_grad_w_;
  std::vector<T> head_grad_b_;
  Tensor<T> head_input_;
  Shape pooled_shape_;
};

/// Builds the default detector: Block A stem, `stm_count` STM blocks with
/// widths doubling per depth, global average pooling and a dense head.
/// Weights are zero until `initialize` is called.
template <typename T>
Network<T> build_imda(const NetworkSpec& spec);

/// General builder used by build_imda and tests. Infers every layer shape
/// and throws ConfigError when STM branches would not line up for the merge.
template <typename T>
Network<T> build_network(const NetworkSpec& spec, const std::optional<BlockSpec>& stem,
                         const std::vector<StmSpec>& stms);

/// Fixed-width text rendering of `describe`, with a total line.
std::string format_layer_table(const std::vector<LayerRow>& rows);

}  // namespace imda::arch
