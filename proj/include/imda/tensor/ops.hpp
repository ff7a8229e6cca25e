#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imda/tensor/tensor.hpp"

namespace imda {

enum class Padding { same, valid };

/// Zero padding applied before and after one spatial axis.
struct AxisPadding {
  std::size_t before = 0;
  std::size_t after = 0;
  std::size_t out = 0;
};

/// Output extent and padding split for one axis. `same` pads with zeros,
/// putting the odd cell at the end (bottom/right).
AxisPadding resolve_axis(std::size_t in, std::size_t kernel_extent, std::size_t stride,
                         Padding padding, const char* axis);

template <typename T>
struct ConvSpec {
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  Padding padding = Padding::same;
  Tensor<T> weights;    // (out, in, kernel_h, kernel_w)
  std::vector<T> bias;  // out

  std::size_t in_channels() const noexcept { return weights.shape().c; }

  /// Allocates zero weights of the right shape.
  static ConvSpec make(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                       std::size_t dilation = 1, Padding padding = Padding::same,
                       std::size_t stride = 1);
};

template <typename T>
struct ConvGrad {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  std::vector<T> grad_b;
};

enum class PoolKind { avg, max };

struct PoolSpec {
  PoolKind kind = PoolKind::max;
  std::size_t window = 2;
  std::size_t stride = 2;
  Padding padding = Padding::valid;
};

template <typename T>
struct DenseSpec {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<T> weights;  // row-major out x in
  std::vector<T> bias;

  static DenseSpec make(std::size_t in, std::size_t out);
};

template <typename T>
struct DenseGrad {
  Tensor<T> grad_x;
  std::vector<T> grad_w;
  std::vector<T> grad_b;
};

/// Raised when inference is requested before running statistics exist.
class StatsUninitialized : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
struct BatchNormSpec {
  std::size_t channels = 0;
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T eps = T(1e-5);
  T momentum = T(0.9);
  bool stats_initialized = false;

  static BatchNormSpec make(std::size_t channels);
};

template <typename T>
struct BatchNormForward {
  Tensor<T> y;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // population variance over N*H*W
};

template <typename T>
struct BatchNormGrad {
  Tensor<T> grad_x;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;
};

template <typename T>
struct SoftmaxLoss {
  T loss = 0;
  Tensor<T> probs;
  Tensor<T> grad_logits;
};

// Convolution (cross-correlation, dilation-aware).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec);
template <typename T>
ConvGrad<T> conv2d_grad(const Tensor<T>& x, const ConvSpec<T>& spec, const Tensor<T>& upstream);
Shape conv2d_output_shape(const Shape& in, std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
                          std::size_t dilation, Padding padding);

// Pooling. Average pooling divides by the number of in-bounds cells.
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, const PoolSpec& spec);
template <typename T>
Tensor<T> pool2d_grad(const Tensor<T>& x, const PoolSpec& spec, const Tensor<T>& upstream);
Shape pool2d_output_shape(const Shape& in, const PoolSpec& spec);

// Batch normalization.
template <typename T>
BatchNormForward<T> batchnorm_train(const Tensor<T>& x, const BatchNormSpec<T>& spec);
template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const BatchNormSpec<T>& spec);
template <typename T>
void update_running_stats(BatchNormSpec<T>& spec, std::span<const T> batch_mean,
                          std::span<const T> batch_var);
template <typename T>
BatchNormGrad<T> batchnorm_grad(const Tensor<T>& x, const BatchNormSpec<T>& spec,
                                const Tensor<T>& upstream);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_grad(const Tensor<T>& x, const Tensor<T>& upstream);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
/// Inverse of concat_channels for gradients: splits `x` by the given widths.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const std::size_t> widths);

/// (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool_grad(const Shape& input_shape, const Tensor<T>& upstream);

/// Fully connected layer over (N, F, 1, 1) feature batches.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseSpec<T>& spec);
template <typename T>
DenseGrad<T> dense_grad(const Tensor<T>& x, const DenseSpec<T>& spec, const Tensor<T>& upstream);

/// Mean softmax cross-entropy over (N, K, 1, 1) logits. Labels must be < K.
template <typename T>
SoftmaxLoss<T> softmax_crossentropy(const Tensor<T>& logits, std::span<const int> labels);
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

}  // namespace imda
