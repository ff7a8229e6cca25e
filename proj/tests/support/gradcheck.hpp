#pragma once

// Finite-difference and brute-force oracles shared by the unit and
// acceptance suites. Nothing here calls into the kernels it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "imda/rng.hpp"
#include "imda/tensor/ops.hpp"

namespace imda::testing {

inline constexpr double kFiniteDifferenceStep = 1e-5;

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Central differences of `loss` with respect to every entry of `values`.
/// `values` is perturbed in place and restored.
inline std::vector<double> numeric_gradient(std::span<double> values, const std::function<double()>& loss,
                                            double step = kFiniteDifferenceStep) {
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = loss();
    values[i] = saved - step;
    const double minus = loss();
    values[i] = saved;
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||), with 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-300 ? 0.0 : std::sqrt(diff) / scale;
}

/// Inner product <out, weights>: turns a tensor-valued op into a scalar loss
/// whose gradient w.r.t. the op output is `weights`.
inline double weighted_sum(const Tensor<double>& out, const Tensor<double>& weights) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * weights.data()[i];
  return s;
}

/// Direct evaluation of the convolution sum: out[a,b] = bias + sum_c sum_i sum_j
/// x[a*s + i*d - pad_top, b*s + j*d - pad_left] * f[i,j], zero outside the image.
inline Tensor<double> brute_force_conv(const Tensor<double>& x, const Tensor<double>& w,
                                       const std::vector<double>& bias, std::size_t stride,
                                       std::size_t dilation, bool same) {
  const Shape& s = x.shape();
  const Shape& ws = w.shape();
  const long eh = static_cast<long>(dilation * (ws.h - 1) + 1);
  const long ew = static_cast<long>(dilation * (ws.w - 1) + 1);
  long oh, ow, pt = 0, pl = 0;
  if (same) {
    oh = (static_cast<long>(s.h) + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    ow = (static_cast<long>(s.w) + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    pt = std::max(0L, (oh - 1) * static_cast<long>(stride) + eh - static_cast<long>(s.h)) / 2;
    pl = std::max(0L, (ow - 1) * static_cast<long>(stride) + ew - static_cast<long>(s.w)) / 2;
  } else {
    oh = (static_cast<long>(s.h) - eh) / static_cast<long>(stride) + 1;
    ow = (static_cast<long>(s.w) - ew) / static_cast<long>(stride) + 1;
  }
  Tensor<double> out({s.n, ws.n, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t m = 0; m < ws.n; ++m)
      for (long a = 0; a < oh; ++a)
        for (long b = 0; b < ow; ++b) {
          double acc = bias[m];
          for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < ws.h; ++i)
              for (std::size_t j = 0; j < ws.w; ++j) {
                const long r = a * static_cast<long>(stride) + static_cast<long>(i * dilation) - pt;
                const long q = b * static_cast<long>(stride) + static_cast<long>(j * dilation) - pl;
                if (r < 0 || q < 0 || r >= static_cast<long>(s.h) || q >= static_cast<long>(s.w)) continue;
                acc += x(n, c, static_cast<std::size_t>(r), static_cast<std::size_t>(q)) * w(m, c, i, j);
              }
          out(n, m, static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = acc;
        }
  return out;
}

/// Values whose pairwise gaps are at least `gap`, shuffled: keeps max-pool
/// windows away from ties.
inline Tensor<double> distinct_tensor(Shape shape, Rng& rng, double gap = 1e-2) {
  Tensor<double> t(shape);
  std::vector<double> values(t.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i) * gap - 0.5 * gap * values.size();
  for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[rng.below(i)]);
  std::copy(values.begin(), values.end(), t.data().begin());
  return t;
}

/// Values bounded away from zero by `margin` (keeps ReLU off its kink).
inline Tensor<double> off_kink_tensor(Shape shape, Rng& rng, double margin = 1e-3) {
  Tensor<double> t(shape);
  for (auto& v : t.data()) {
    const double mag = rng.uniform(margin * 10, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

}  // namespace imda::testing
