#include <algorithm>
#include <string>
#include <vector>

#include "imda/tensor/ops.hpp"
#include "imda/tensor/parallel.hpp"

namespace imda {

using Index = std::ptrdiff_t;

namespace {

struct PoolGeometry {
  AxisPadding rows, cols;
};

PoolGeometry pool_geometry(const Shape& in, const PoolSpec& spec) {
  if (spec.window == 0) throw DimensionError("window", "pool window must be at least 1");
  return {resolve_axis(in.h, spec.window, spec.stride, spec.padding, "height"),
          resolve_axis(in.w, spec.window, spec.stride, spec.padding, "width")};
}

// In-bounds window [begin, end) along one axis for output index `o`.
inline void window_bounds(std::size_t o, std::size_t stride, std::size_t window,
                          std::size_t before, std::size_t extent, Index& begin, Index& end) {
  const Index start = static_cast<Index>(o * stride) - static_cast<Index>(before);
  begin = std::max<Index>(start, 0);
  end = std::min<Index>(start + static_cast<Index>(window), static_cast<Index>(extent));
}

struct Window {
  Index begin, end;
};

std::vector<Window> axis_windows(std::size_t out, const PoolSpec& spec, std::size_t before, std::size_t extent) {
  std::vector<Window> windows(out);
  for (std::size_t o = 0; o < out; ++o) window_bounds(o, spec.stride, spec.window, before, extent, windows[o].begin, windows[o].end);
  return windows;
}

}  // namespace

Shape pool2d_output_shape(const Shape& in, const PoolSpec& spec) {
  auto g = pool_geometry(in, spec);
  return {in.n, in.c, g.rows.out, g.cols.out};
}

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, const PoolSpec& spec) {
  const Shape& s = x.shape();
  const auto g = pool_geometry(s, spec);
  const std::size_t oh = g.rows.out, ow = g.cols.out;
  Tensor<T> out({s.n, s.c, oh, ow});
  const Index planes = static_cast<Index>(s.n * s.c);

  const auto rows = axis_windows(oh, spec, g.rows.before, s.h);
  const auto cols = axis_windows(ow, spec, g.cols.before, s.w);
  const bool is_max = spec.kind == PoolKind::max;

  // Separable: reduce each input row over the column windows, then reduce
  // those partial rows over the row windows.
#pragma omp parallel num_threads(worker_count())
  {
    std::vector<T> partial(s.h * ow);
#pragma omp for schedule(static)
    for (Index p = 0; p < planes; ++p) {
      const T* src = x.data().data() + static_cast<std::size_t>(p) * s.plane();
      T* dst = out.data().data() + static_cast<std::size_t>(p) * oh * ow;
      for (std::size_t iy = 0; iy < s.h; ++iy) {
        const T* in_row = src + iy * s.w;
        T* part = partial.data() + iy * ow;
        for (std::size_t xo = 0; xo < ow; ++xo) {
          T acc = in_row[cols[xo].begin];
          for (Index ix = cols[xo].begin + 1; ix < cols[xo].end; ++ix)
            acc = is_max ? std::max(acc, in_row[ix]) : acc + in_row[ix];
          part[xo] = acc;
        }
      }
      for (std::size_t y = 0; y < oh; ++y) {
        T* out_row = dst + y * ow;
        const T* first = partial.data() + static_cast<std::size_t>(rows[y].begin) * ow;
        std::copy(first, first + ow, out_row);
        for (Index iy = rows[y].begin + 1; iy < rows[y].end; ++iy) {
          const T* part = partial.data() + static_cast<std::size_t>(iy) * ow;
          if (is_max) {
            for (std::size_t xo = 0; xo < ow; ++xo) out_row[xo] = std::max(out_row[xo], part[xo]);
          } else {
            for (std::size_t xo = 0; xo < ow; ++xo) out_row[xo] += part[xo];
          }
        }
        if (!is_max) {
          const T height = static_cast<T>(rows[y].end - rows[y].begin);
          for (std::size_t xo = 0; xo < ow; ++xo)
            out_row[xo] /= height * static_cast<T>(cols[xo].end - cols[xo].begin);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> pool2d_grad(const Tensor<T>& x, const PoolSpec& spec, const Tensor<T>& upstream) {
  const Shape& s = x.shape();
  const auto g = pool_geometry(s, spec);
  const std::size_t oh = g.rows.out, ow = g.cols.out;
  const Shape expected{s.n, s.c, oh, ow};
  if (upstream.shape() != expected) {
    throw DimensionError("upstream", "pool2d_grad upstream " + upstream.shape().str() +
                                         " does not match forward output " + expected.str());
  }
  Tensor<T> grad(s);
  const Index planes = static_cast<Index>(s.n * s.c);

  const auto rows = axis_windows(oh, spec, g.rows.before, s.h);
  const auto cols = axis_windows(ow, spec, g.cols.before, s.w);
  const Index width = static_cast<Index>(s.w);

#pragma omp parallel num_threads(worker_count())
  {
    std::vector<T> partial(spec.kind == PoolKind::avg ? s.h * ow : 0);
#pragma omp for schedule(static)
    for (Index p = 0; p < planes; ++p) {
      const T* src = x.data().data() + static_cast<std::size_t>(p) * s.plane();
      const T* up = upstream.data().data() + static_cast<std::size_t>(p) * oh * ow;
      T* dst = grad.data().data() + static_cast<std::size_t>(p) * s.plane();
      if (spec.kind == PoolKind::max) {
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t xo = 0; xo < ow; ++xo) {
            // Ties go to the first maximum in row-major order.
            Index arg = rows[y].begin * width + cols[xo].begin;
            T best = src[arg];
            for (Index iy = rows[y].begin; iy < rows[y].end; ++iy)
              for (Index ix = cols[xo].begin; ix < cols[xo].end; ++ix)
                if (src[iy * width + ix] > best) {
                  best = src[iy * width + ix];
                  arg = iy * width + ix;
                }
            dst[arg] += up[y * ow + xo];
          }
        }
        continue;
      }
      // Average: transpose of the separable forward pass.
      std::fill(partial.begin(), partial.end(), T{0});
      for (std::size_t y = 0; y < oh; ++y) {
        const T height = static_cast<T>(rows[y].end - rows[y].begin);
        for (Index iy = rows[y].begin; iy < rows[y].end; ++iy) {
          T* part = partial.data() + static_cast<std::size_t>(iy) * ow;
          for (std::size_t xo = 0; xo < ow; ++xo)
            part[xo] += up[y * ow + xo] / (height * static_cast<T>(cols[xo].end - cols[xo].begin));
        }
      }
      for (std::size_t iy = 0; iy < s.h; ++iy) {
        const T* part = partial.data() + iy * ow;
        T* dst_row = dst + iy * s.w;
        for (std::size_t xo = 0; xo < ow; ++xo)
          for (Index ix = cols[xo].begin; ix < cols[xo].end; ++ix) dst_row[ix] += part[xo];
      }
    }
  }
  return grad;
}

#define IMDA_INSTANTIATE_POOL(T)                                   \
  template Tensor<T> pool2d<T>(const Tensor<T>&, const PoolSpec&); \
  template Tensor<T> pool2d_grad<T>(const Tensor<T>&, const PoolSpec&, const Tensor<T>&);

IMDA_INSTANTIATE_POOL(float)
IMDA_INSTANTIATE_POOL(double)

}  // namespace imda
