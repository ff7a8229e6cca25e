#include <algorithm>
#include <cmath>
#include <string>

#include "imda/tensor/ops.hpp"
#include "imda/tensor/tensor.hpp"

namespace imda {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  const Shape& s = x.shape();
  if (begin + count > s.c) {
    throw DimensionError("channel", "channel slice [" + std::to_string(begin) + ", " +
                                        std::to_string(begin + count) + ") exceeds " +
                                        std::to_string(s.c) + " channels");
  }
  Tensor<T> out({s.n, count, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* src = x.plane(n, begin);
    std::copy(src, src + count * s.plane(), out.plane(n, 0));
  }
  return out;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, std::size_t index) {
  const Shape& s = x.shape();
  if (index >= s.n) throw DimensionError("batch", "sample index out of range");
  Tensor<T> out({1, s.c, s.h, s.w});
  const T* src = x.plane(index, 0);
  std::copy(src, src + s.c * s.plane(), out.data().data());
  return out;
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_grad(const Tensor<T>& x, const Tensor<T>& upstream) {
  if (x.shape() != upstream.shape()) {
    throw DimensionError("upstream", "relu_grad upstream " + upstream.shape().str() +
                                         " does not match input " + x.shape().str());
  }
  Tensor<T> out(x.shape());
  auto src = x.data();
  auto up = upstream.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? up[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("parts", "concat_channels needs at least one part");
  const Shape& first = parts.front().shape();
  std::size_t channels = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Shape& s = parts[k].shape();
    const char* axis = s.n != first.n ? "batch" : s.h != first.h ? "height" : s.w != first.w ? "width" : nullptr;
    if (axis != nullptr) {
      throw DimensionError(axis, "concat_channels part " + std::to_string(k) + " has shape " +
                                     s.str() + ", mismatching part 0 " + first.str() +
                                     " along " + axis);
    }
    channels += s.c;
  }
  Tensor<T> out({first.n, channels, first.h, first.w});
  for (std::size_t n = 0; n < first.n; ++n) {
    T* dst = out.plane(n, 0);
    for (const auto& part : parts) {
      const std::size_t len = part.shape().c * first.plane();
      const T* src = part.plane(n, 0);
      dst = std::copy(src, src + len, dst);
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const std::size_t> widths) {
  std::size_t total = 0;
  for (auto w : widths) total += w;
  if (total != x.shape().c) {
    throw DimensionError("channel", "split widths sum to " + std::to_string(total) + ", tensor has " +
                                        std::to_string(x.shape().c) + " channels");
  }
  std::vector<Tensor<T>> parts;
  parts.reserve(widths.size());
  std::size_t begin = 0;
  for (auto w : widths) {
    parts.push_back(slice_channels(x, begin, w));
    begin += w;
  }
  return parts;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.plane() == 0) throw DimensionError("height", "global average pool over an empty plane");
  Tensor<T> out({s.n, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = x.plane(n, c);
      T sum{0};
      for (std::size_t k = 0; k < s.plane(); ++k) sum += p[k];
      out(n, c, 0, 0) = sum / static_cast<T>(s.plane());
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_grad(const Shape& input_shape, const Tensor<T>& upstream) {
  const Shape expected{input_shape.n, input_shape.c, 1, 1};
  if (upstream.shape() != expected) {
    throw DimensionError("upstream", "global_avg_pool_grad upstream " + upstream.shape().str() +
                                         " does not match " + expected.str());
  }
  Tensor<T> grad(input_shape);
  const T inv = T{1} / static_cast<T>(input_shape.plane());
  for (std::size_t n = 0; n < input_shape.n; ++n) {
    for (std::size_t c = 0; c < input_shape.c; ++c) {
      T* p = grad.plane(n, c);
      std::fill(p, p + input_shape.plane(), upstream(n, c, 0, 0) * inv);
    }
  }
  return grad;
}

template <typename T>
DenseSpec<T> DenseSpec<T>::make(std::size_t in, std::size_t out) {
  DenseSpec<T> spec;
  spec.in_features = in;
  spec.out_features = out;
  spec.weights.assign(in * out, T{0});
  spec.bias.assign(out, T{0});
  return spec;
}

namespace {

template <typename T>
void check_dense(const Tensor<T>& x, const DenseSpec<T>& spec) {
  if (spec.weights.size() != spec.in_features * spec.out_features ||
      spec.bias.size() != spec.out_features) {
    throw DimensionError("weights", "dense weight extents do not match " +
                                        std::to_string(spec.out_features) + "x" +
                                        std::to_string(spec.in_features));
  }
  const Shape& s = x.shape();
  if (s.c * s.plane() != spec.in_features) {
    throw DimensionError("feature", "dense expects " + std::to_string(spec.in_features) +
                                        " input features, got " + std::to_string(s.c * s.plane()));
  }
}

}  // namespace

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseSpec<T>& spec) {
  check_dense(x, spec);
  const std::size_t batch = x.shape().n;
  const std::size_t in = spec.in_features;
  Tensor<T> out({batch, spec.out_features, 1, 1});
  for (std::size_t n = 0; n < batch; ++n) {
    const T* row = x.plane(n, 0);
    for (std::size_t o = 0; o < spec.out_features; ++o) {
      const T* w = spec.weights.data() + o * in;
      T acc = spec.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * row[i];
      out(n, o, 0, 0) = acc;
    }
  }
  return out;
}

template <typename T>
DenseGrad<T> dense_grad(const Tensor<T>& x, const DenseSpec<T>& spec, const Tensor<T>& upstream) {
  check_dense(x, spec);
  const std::size_t batch = x.shape().n;
  const std::size_t in = spec.in_features;
  if (upstream.shape() != Shape{batch, spec.out_features, 1, 1}) {
    throw DimensionError("upstream", "dense_grad upstream " + upstream.shape().str() +
                                         " does not match output (" + std::to_string(batch) +
                                         ", " + std::to_string(spec.out_features) + ", 1, 1)");
  }
  DenseGrad<T> grad{Tensor<T>(x.shape()), std::vector<T>(spec.weights.size()),
                    std::vector<T>(spec.out_features)};
  for (std::size_t n = 0; n < batch; ++n) {
    const T* row = x.plane(n, 0);
    T* gx = grad.grad_x.plane(n, 0);
    for (std::size_t o = 0; o < spec.out_features; ++o) {
      const T u = upstream(n, o, 0, 0);
      const T* w = spec.weights.data() + o * in;
      T* gw = grad.grad_w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gx[i] += w[i] * u;
        gw[i] += row[i] * u;
      }
      grad.grad_b[o] += u;
    }
  }
  return grad;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  if (s.plane() != 1) throw DimensionError("height", "softmax expects (N, K, 1, 1) logits");
  Tensor<T> probs(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* z = logits.plane(n, 0);
    T* p = probs.plane(n, 0);
    const T top = *std::max_element(z, z + s.c);
    T sum{0};
    for (std::size_t k = 0; k < s.c; ++k) sum += (p[k] = std::exp(z[k] - top));
    for (std::size_t k = 0; k < s.c; ++k) p[k] /= sum;
  }
  return probs;
}

template <typename T>
SoftmaxLoss<T> softmax_crossentropy(const Tensor<T>& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.plane() != 1) throw DimensionError("height", "softmax expects (N, K, 1, 1) logits");
  if (labels.size() != s.n) {
    throw DimensionError("batch", "got " + std::to_string(labels.size()) + " labels for " +
                                      std::to_string(s.n) + " logit rows");
  }
  SoftmaxLoss<T> out{T{0}, Tensor<T>(s), Tensor<T>(s)};
  if (s.n == 0) return out;
  double total = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= s.c) {
      throw std::invalid_argument("label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(s.c) + ")");
    }
    const T* z = logits.plane(n, 0);
    T* p = out.probs.plane(n, 0);
    const T top = *std::max_element(z, z + s.c);
    T sum{0};
    for (std::size_t k = 0; k < s.c; ++k) sum += (p[k] = std::exp(z[k] - top));
    const T log_sum = std::log(sum) + top;
    for (std::size_t k = 0; k < s.c; ++k) p[k] /= sum;
    total += static_cast<double>(log_sum - z[label]);
    T* g = out.grad_logits.plane(n, 0);
    for (std::size_t k = 0; k < s.c; ++k) {
      g[k] = (p[k] - (static_cast<std::size_t>(label) == k ? T{1} : T{0})) / static_cast<T>(s.n);
    }
  }
  out.loss = static_cast<T>(total / static_cast<double>(s.n));
  return out;
}

#define IMDA_INSTANTIATE_ELEMENTWISE(T)                                                          \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);             \
  template Tensor<T> slice_batch<T>(const Tensor<T>&, std::size_t);                             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                 \
  template Tensor<T> relu_grad<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>);                            \
  template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&, std::span<const std::size_t>); \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                      \
  template Tensor<T> global_avg_pool_grad<T>(const Shape&, const Tensor<T>&);                   \
  template struct DenseSpec<T>;                                                                 \
  template Tensor<T> dense<T>(const Tensor<T>&, const DenseSpec<T>&);                           \
  template DenseGrad<T> dense_grad<T>(const Tensor<T>&, const DenseSpec<T>&, const Tensor<T>&); \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                              \
  template SoftmaxLoss<T> softmax_crossentropy<T>(const Tensor<T>&, std::span<const int>);

IMDA_INSTANTIATE_ELEMENTWISE(float)
IMDA_INSTANTIATE_ELEMENTWISE(double)

}  // namespace imda
