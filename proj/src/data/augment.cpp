#include "imda/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "imda/rng.hpp"

namespace imda::data {

void AugmentSpec::validate() const {
  if (rotation_max < rotation_min || scale_max < scale_min || shear_max < shear_min) {
    throw DataError("augmentation ranges must satisfy min <= max");
  }
  if (scale_min <= 0.0) throw DataError("augmentation scale must be positive");
  if (reflect_probability < 0.0 || reflect_probability > 1.0) {
    throw DataError("reflect probability must lie in [0, 1]");
  }
}

AugmentParams draw_params(const AugmentSpec& spec, std::uint64_t draw_seed) {
  Rng rng(derive_seed(spec.seed, {draw_seed}));
  AugmentParams p;
  p.rotation_deg = rng.uniform(spec.rotation_min, spec.rotation_max);
  p.scale = spec.scale_min + (spec.scale_max - spec.scale_min) * rng.uniform();
  p.shear = rng.uniform(spec.shear_min, spec.shear_max);
  p.reflect = rng.uniform() < spec.reflect_probability;
  return p;
}

namespace {

// Out-of-range tolerance for coordinates that land on the border up to
// rounding, such as a full turn.
constexpr double kEdge = 1e-6;

float sample(const ImageSample& image, double x, double y) {
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  if (x < -kEdge || y < -kEdge || x > max_x + kEdge || y > max_y + kEdge) return 0.0f;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, image.width - 1);
  const std::size_t y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double v00 = image.at(y0, x0), v01 = image.at(y0, x1);
  const double v10 = image.at(y1, x0), v11 = image.at(y1, x1);
  const double top = v00 + fx * (v01 - v00);
  const double bottom = v10 + fx * (v11 - v10);
  return static_cast<float>(top + fy * (bottom - top));
}

}  // namespace

ImageSample apply_augment(const ImageSample& image, const AugmentParams& params) {
  // Forward map about the center: Shear * Scale * Rotate * Reflect.
  // Output pixels pull from the inverse: Reflect^-1 * Rotate^-1 * Scale^-1 * Shear^-1.
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double inv_scale = 1.0 / params.scale;
  // Shear^-1 = [[1, -k], [0, 1]]; Rotate^-1 = [[c, s], [-s, c]].
  const double k = params.shear;
  double a00 = inv_scale * c, a01 = inv_scale * (-c * k + s);
  double a10 = inv_scale * (-s), a11 = inv_scale * (s * k + c);
  if (params.reflect) {
    a00 = -a00;
    a01 = -a01;
  }
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;

  ImageSample out = image;
  for (std::size_t r = 0; r < image.height; ++r) {
    const double dy = static_cast<double>(r) - cy;
    for (std::size_t col = 0; col < image.width; ++col) {
      const double dx = static_cast<double>(col) - cx;
      const double sx = a00 * dx + a01 * dy + cx;
      const double sy = a10 * dx + a11 * dy + cy;
      out.pixels[r * image.width + col] = sample(image, sx, sy);
    }
  }
  out.provenance = Provenance::augmented;
  out.augment = params;
  return out;
}

ImageSample augment(const ImageSample& image, const AugmentSpec& spec, std::uint64_t draw_seed) {
  if (!spec.enabled) return image;
  return apply_augment(image, draw_params(spec, draw_seed));
}

}  // namespace imda::data
