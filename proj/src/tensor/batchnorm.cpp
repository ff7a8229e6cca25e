#include <cmath>
#include <string>

#include "imda/tensor/ops.hpp"
#include "imda/tensor/parallel.hpp"

namespace imda {

using Index = std::ptrdiff_t;

namespace {

template <typename T>
void check_channels(const Tensor<T>& x, const BatchNormSpec<T>& spec) {
  if (x.shape().c != spec.channels || spec.gamma.size() != spec.channels ||
      spec.beta.size() != spec.channels) {
    throw DimensionError("channel", "batchnorm expects " + std::to_string(spec.channels) +
                                        " channels, got " + std::to_string(x.shape().c));
  }
  if (!(spec.eps > T{0})) throw std::invalid_argument("batchnorm eps must be positive");
}

}  // namespace

template <typename T>
BatchNormSpec<T> BatchNormSpec<T>::make(std::size_t channels) {
  BatchNormSpec<T> spec;
  spec.channels = channels;
  spec.gamma.assign(channels, T{1});
  spec.beta.assign(channels, T{0});
  spec.running_mean.assign(channels, T{0});
  spec.running_var.assign(channels, T{1});
  return spec;
}

template <typename T>
BatchNormForward<T> batchnorm_train(const Tensor<T>& x, const BatchNormSpec<T>& spec) {
  check_channels(x, spec);
  const Shape& s = x.shape();
  const std::size_t count = s.n * s.plane();
  if (count == 0) throw DimensionError("batch", "batchnorm on an empty batch");

  BatchNormForward<T> out{Tensor<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  const Index channels = static_cast<Index>(s.c);

#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (Index ci = 0; ci < channels; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double sum = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) sum += p[k];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) {
        const double d = p[k] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(spec.eps)));
    const T scale = spec.gamma[c] * inv_std;
    const T m = static_cast<T>(mean);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* q = out.y.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) q[k] = (p[k] - m) * scale + spec.beta[c];
    }
    out.batch_mean[c] = m;
    out.batch_var[c] = static_cast<T>(var);
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const BatchNormSpec<T>& spec) {
  check_channels(x, spec);
  if (!spec.stats_initialized) {
    throw StatsUninitialized(
        "batchnorm running stats uninitialized: run a training step or load a model first");
  }
  const Shape& s = x.shape();
  Tensor<T> y(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    const T inv_std = T{1} / std::sqrt(spec.running_var[c] + spec.eps);
    const T scale = spec.gamma[c] * inv_std;
    const T shift = spec.beta[c] - spec.running_mean[c] * scale;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* q = y.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) q[k] = p[k] * scale + shift;
    }
  }
  return y;
}

template <typename T>
void update_running_stats(BatchNormSpec<T>& spec, std::span<const T> batch_mean,
                          std::span<const T> batch_var) {
  if (batch_mean.size() != spec.channels || batch_var.size() != spec.channels) {
    throw DimensionError("channel", "running stat update with mismatched channel count");
  }
  if (!spec.stats_initialized) {
    // The first batch seeds the running estimates.
    spec.running_mean.assign(batch_mean.begin(), batch_mean.end());
    spec.running_var.assign(batch_var.begin(), batch_var.end());
    spec.stats_initialized = true;
    return;
  }
  const T keep = spec.momentum;
  for (std::size_t c = 0; c < spec.channels; ++c) {
    spec.running_mean[c] = keep * spec.running_mean[c] + (T{1} - keep) * batch_mean[c];
    spec.running_var[c] = keep * spec.running_var[c] + (T{1} - keep) * batch_var[c];
  }
}

template <typename T>
BatchNormGrad<T> batchnorm_grad(const Tensor<T>& x, const BatchNormSpec<T>& spec,
                                const Tensor<T>& upstream) {
  check_channels(x, spec);
  const Shape& s = x.shape();
  if (upstream.shape() != s) {
    throw DimensionError("upstream", "batchnorm_grad upstream " + upstream.shape().str() +
                                         " does not match input " + s.str());
  }
  const std::size_t count = s.n * s.plane();
  BatchNormGrad<T> grad{Tensor<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  const Index channels = static_cast<Index>(s.c);

#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (Index ci = 0; ci < channels; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double sum = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) sum += p[k];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) {
        const double d = p[k] - mean;
        sq += d * d;
      }
    }
    const double inv_std = 1.0 / std::sqrt(sq / static_cast<double>(count) + static_cast<double>(spec.eps));

    double sum_up = 0, sum_up_xhat = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      const T* u = upstream.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) {
        sum_up += u[k];
        sum_up_xhat += u[k] * ((p[k] - mean) * inv_std);
      }
    }
    grad.grad_beta[c] = static_cast<T>(sum_up);
    grad.grad_gamma[c] = static_cast<T>(sum_up_xhat);

    const double scale = static_cast<double>(spec.gamma[c]) * inv_std / static_cast<double>(count);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      const T* u = upstream.plane(n, c);
      T* g = grad.grad_x.plane(n, c);
      for (std::size_t k = 0; k < s.plane(); ++k) {
        const double xhat = (p[k] - mean) * inv_std;
        g[k] = static_cast<T>(scale * (static_cast<double>(count) * u[k] - sum_up - xhat * sum_up_xhat));
      }
    }
  }
  return grad;
}

#define IMDA_INSTANTIATE_BN(T)                                                                  \
  template struct BatchNormSpec<T>;                                                             \
  template BatchNormForward<T> batchnorm_train<T>(const Tensor<T>&, const BatchNormSpec<T>&);   \
  template Tensor<T> batchnorm_infer<T>(const Tensor<T>&, const BatchNormSpec<T>&);             \
  template void update_running_stats<T>(BatchNormSpec<T>&, std::span<const T>, std::span<const T>); \
  template BatchNormGrad<T> batchnorm_grad<T>(const Tensor<T>&, const BatchNormSpec<T>&,        \
                                              const Tensor<T>&);

IMDA_INSTANTIATE_BN(float)
IMDA_INSTANTIATE_BN(double)

}  // namespace imda
