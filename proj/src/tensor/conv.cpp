#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "imda/tensor/ops.hpp"
#include "imda/tensor/parallel.hpp"

namespace imda {

using Index = std::ptrdiff_t;

AxisPadding resolve_axis(std::size_t in, std::size_t kernel_extent, std::size_t stride,
                         Padding padding, const char* axis) {
  if (stride == 0) throw DimensionError(axis, std::string("stride along ") + axis + " must be positive");
  if (kernel_extent == 0) throw DimensionError(axis, std::string("empty kernel along ") + axis);
  AxisPadding result;
  if (padding == Padding::valid) {
    if (kernel_extent > in) {
      throw DimensionError(axis, std::string("effective kernel extent ") +
                                     std::to_string(kernel_extent) + " exceeds input " + axis +
                                     " " + std::to_string(in));
    }
    result.out = (in - kernel_extent) / stride + 1;
    return result;
  }
  if (in == 0) throw DimensionError(axis, std::string("empty input along ") + axis);
  result.out = (in + stride - 1) / stride;
  std::size_t needed = (result.out - 1) * stride + kernel_extent;
  std::size_t total = needed > in ? needed - in : 0;
  result.before = total / 2;
  result.after = total - result.before;
  return result;
}

namespace {

struct ConvGeometry {
  std::size_t n, in_c, h, w;
  std::size_t out_c, kh, kw, stride, dilation;
  AxisPadding rows, cols;
};

ConvGeometry geometry(const Shape& in, std::size_t in_channels, std::size_t out_channels,
                      std::size_t kh, std::size_t kw, std::size_t stride, std::size_t dilation,
                      Padding padding) {
  if (in.c != in_channels) {
    throw DimensionError("channel", "conv2d expects " + std::to_string(in_channels) +
                                        " input channels, got " + std::to_string(in.c));
  }
  if (dilation == 0) throw DimensionError("dilation", "dilation rate must be positive");
  ConvGeometry g{in.n, in.c, in.h, in.w, out_channels, kh, kw, stride, dilation, {}, {}};
  g.rows = resolve_axis(in.h, dilation * (kh - 1) + 1, stride, padding, "height");
  g.cols = resolve_axis(in.w, dilation * (kw - 1) + 1, stride, padding, "width");
  return g;
}

// Output columns [lo, hi) whose input column x*stride + shift lies inside [0, w).
inline void column_range(Index shift, std::size_t stride, std::size_t w, std::size_t out_w,
                         Index& lo, Index& hi) {
  const Index s = static_cast<Index>(stride);
  lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  Index last = static_cast<Index>(w) - 1 - shift;  // largest x*stride allowed
  hi = last < 0 ? 0 : last / s + 1;
  hi = std::min(hi, static_cast<Index>(out_w));
  if (lo > hi) lo = hi;
}

template <typename T>
void check_spec(const ConvSpec<T>& spec) {
  const Shape& ws = spec.weights.shape();
  if (ws.n != spec.out_channels || ws.h != spec.kernel_h || ws.w != spec.kernel_w) {
    throw DimensionError("weights", "conv weights " + ws.str() + " do not match out_channels=" +
                                        std::to_string(spec.out_channels) + " kernel " +
                                        std::to_string(spec.kernel_h) + "x" +
                                        std::to_string(spec.kernel_w));
  }
  if (spec.bias.size() != spec.out_channels) {
    throw DimensionError("bias", "conv bias length " + std::to_string(spec.bias.size()) +
                                     " does not match out_channels " +
                                     std::to_string(spec.out_channels));
  }
}

}  // namespace

Shape conv2d_output_shape(const Shape& in, std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
                          std::size_t dilation, Padding padding) {
  auto g = geometry(in, in_channels, out_channels, kernel_h, kernel_w, stride, dilation, padding);
  return {in.n, out_channels, g.rows.out, g.cols.out};
}

template <typename T>
ConvSpec<T> ConvSpec<T>::make(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                              std::size_t dilation, Padding padding, std::size_t stride) {
  ConvSpec<T> spec;
  spec.out_channels = out;
  spec.kernel_h = kh;
  spec.kernel_w = kw;
  spec.stride = stride;
  spec.dilation = dilation;
  spec.padding = padding;
  spec.weights = Tensor<T>({out, in, kh, kw});
  spec.bias.assign(out, T{0});
  return spec;
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unfolds one sample into a (C*kh*kw) x (oh*ow) matrix; padded taps are zero.
template <typename T>
void im2col(const T* sample, const ConvGeometry& g, T* cols) {
  const std::size_t oh = g.rows.out, ow = g.cols.out;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const T* src = sample + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      const Index row_shift = static_cast<Index>(i * g.dilation) - static_cast<Index>(g.rows.before);
      for (std::size_t j = 0; j < g.kw; ++j) {
        const Index col_shift = static_cast<Index>(j * g.dilation) - static_cast<Index>(g.cols.before);
        Index lo, hi;
        column_range(col_shift, g.stride, g.w, ow, lo, hi);
        T* dst = cols + ((c * g.kh + i) * g.kw + j) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          T* out_row = dst + y * ow;
          const Index iy = static_cast<Index>(y * g.stride) + row_shift;
          if (iy < 0 || iy >= static_cast<Index>(g.h)) {
            std::fill(out_row, out_row + ow, T{0});
            continue;
          }
          const T* in_row = src + static_cast<std::size_t>(iy) * g.w;
          std::fill(out_row, out_row + lo, T{0});
          if (g.stride == 1) {
            std::copy(in_row + lo + col_shift, in_row + hi + col_shift, out_row + lo);
          } else {
            for (Index xo = lo; xo < hi; ++xo) out_row[xo] = in_row[xo * static_cast<Index>(g.stride) + col_shift];
          }
          std::fill(out_row + hi, out_row + ow, T{0});
        }
      }
    }
  }
}

// Adjoint of im2col: scatters (C*kh*kw) x (oh*ow) back onto one sample.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* sample) {
  const std::size_t oh = g.rows.out, ow = g.cols.out;
  for (std::size_t c = 0; c < g.in_c; ++c) {
    T* dst = sample + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      const Index row_shift = static_cast<Index>(i * g.dilation) - static_cast<Index>(g.rows.before);
      for (std::size_t j = 0; j < g.kw; ++j) {
        const Index col_shift = static_cast<Index>(j * g.dilation) - static_cast<Index>(g.cols.before);
        Index lo, hi;
        column_range(col_shift, g.stride, g.w, ow, lo, hi);
        const T* src = cols + ((c * g.kh + i) * g.kw + j) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const Index iy = static_cast<Index>(y * g.stride) + row_shift;
          if (iy < 0 || iy >= static_cast<Index>(g.h)) continue;
          const T* up_row = src + y * ow;
          T* dst_row = dst + static_cast<std::size_t>(iy) * g.w;
          if (g.stride == 1) {
            T* shifted = dst_row + col_shift;
            for (Index xo = lo; xo < hi; ++xo) shifted[xo] += up_row[xo];
          } else {
            for (Index xo = lo; xo < hi; ++xo) dst_row[xo * static_cast<Index>(g.stride) + col_shift] += up_row[xo];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.rows.before == 0 && g.cols.before == 0 &&
         g.rows.out == g.h && g.cols.out == g.w;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec) {
  check_spec(spec);
  const auto g = geometry(x.shape(), spec.in_channels(), spec.out_channels, spec.kernel_h,
                          spec.kernel_w, spec.stride, spec.dilation, spec.padding);
  const std::size_t oh = g.rows.out, ow = g.cols.out;
  const Index taps = static_cast<Index>(g.in_c * g.kh * g.kw);
  const Index pixels = static_cast<Index>(oh * ow);
  Tensor<T> out({g.n, g.out_c, oh, ow});
  const Eigen::Map<const RowMatrix<T>> w(spec.weights.data().data(), static_cast<Index>(g.out_c), taps);
  const bool pointwise = is_pointwise(g);

#pragma omp parallel num_threads(worker_count())
  {
    std::vector<T> cols(pointwise ? 0 : static_cast<std::size_t>(taps * pixels));
#pragma omp for schedule(static)
    for (Index n = 0; n < static_cast<Index>(g.n); ++n) {
      const T* sample = x.plane(static_cast<std::size_t>(n), 0);
      if (!pointwise) im2col(sample, g, cols.data());
      Eigen::Map<const RowMatrix<T>> in(pointwise ? sample : cols.data(), taps, pixels);
      Eigen::Map<RowMatrix<T>> dst(out.plane(static_cast<std::size_t>(n), 0), static_cast<Index>(g.out_c), pixels);
      dst.noalias() = w * in;
      for (std::size_t m = 0; m < g.out_c; ++m) dst.row(static_cast<Index>(m)).array() += spec.bias[m];
    }
  }
  return out;
}

template <typename T>
ConvGrad<T> conv2d_grad(const Tensor<T>& x, const ConvSpec<T>& spec, const Tensor<T>& upstream) {
  check_spec(spec);
  const auto g = geometry(x.shape(), spec.in_channels(), spec.out_channels, spec.kernel_h,
                          spec.kernel_w, spec.stride, spec.dilation, spec.padding);
  const std::size_t oh = g.rows.out, ow = g.cols.out;
  const Shape expected{g.n, g.out_c, oh, ow};
  if (upstream.shape() != expected) {
    throw DimensionError("upstream", "conv2d_grad upstream " + upstream.shape().str() +
                                         " does not match forward output " + expected.str());
  }
  const Index taps = static_cast<Index>(g.in_c * g.kh * g.kw);
  const Index pixels = static_cast<Index>(oh * ow);
  const Index out_c = static_cast<Index>(g.out_c);
  const bool pointwise = is_pointwise(g);

  ConvGrad<T> grad;
  grad.grad_x = Tensor<T>(x.shape());
  grad.grad_w = Tensor<T>(spec.weights.shape());
  grad.grad_b.assign(g.out_c, T{0});

  for (std::size_t m = 0; m < g.out_c; ++m) {
    T acc{0};
    for (std::size_t n = 0; n < g.n; ++n) {
      const T* up = upstream.plane(n, m);
      for (std::size_t k = 0; k < oh * ow; ++k) acc += up[k];
    }
    grad.grad_b[m] = acc;
  }

  const Eigen::Map<const RowMatrix<T>> w(spec.weights.data().data(), out_c, taps);
  // Per-sample weight gradients are kept apart and summed in sample order.
  std::vector<RowMatrix<T>> partial(g.n);

#pragma omp parallel num_threads(worker_count())
  {
    std::vector<T> cols(pointwise ? 0 : static_cast<std::size_t>(taps * pixels));
    RowMatrix<T> dcols;
#pragma omp for schedule(static)
    for (Index n = 0; n < static_cast<Index>(g.n); ++n) {
      const std::size_t s = static_cast<std::size_t>(n);
      Eigen::Map<const RowMatrix<T>> up(upstream.plane(s, 0), out_c, pixels);
      const T* sample = x.plane(s, 0);
      if (!pointwise) im2col(sample, g, cols.data());
      Eigen::Map<const RowMatrix<T>> in(pointwise ? sample : cols.data(), taps, pixels);
      partial[s].noalias() = up * in.transpose();
      if (pointwise) {
        Eigen::Map<RowMatrix<T>> dst(grad.grad_x.plane(s, 0), taps, pixels);
        dst.noalias() = w.transpose() * up;
      } else {
        dcols.noalias() = w.transpose() * up;
        col2im(dcols.data(), g, grad.grad_x.plane(s, 0));
      }
    }
  }
  Eigen::Map<RowMatrix<T>> gw(grad.grad_w.data().data(), out_c, taps);
  gw.setZero();
  for (const auto& p : partial) gw += p;
  return grad;
}

#define IMDA_INSTANTIATE_CONV(T)                                                      \
  template struct ConvSpec<T>;                                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvSpec<T>&);                 \
  template ConvGrad<T> conv2d_grad<T>(const Tensor<T>&, const ConvSpec<T>&, const Tensor<T>&);

IMDA_INSTANTIATE_CONV(float)
IMDA_INSTANTIATE_CONV(double)

}  // namespace imda
