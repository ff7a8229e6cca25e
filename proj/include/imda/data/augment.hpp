#pragma once

#include <cstdint>

#include "imda/data/image.hpp"

namespace imda::data {

struct AugmentSpec {
  bool enabled = true;
  double rotation_min = 0.0;
  double rotation_max = 360.0;
  double scale_min = 0.5;
  double scale_max = 1.0;
  double shear_min = -0.5;
  double shear_max = 0.5;
  double reflect_probability = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws rotation, scale, shear and reflection from the spec's ranges. The
/// same (spec, draw_seed) always yields the same parameters.
AugmentParams draw_params(const AugmentSpec& spec, std::uint64_t draw_seed);

/// One affine warp about the image center, applied as reflect, rotate,
/// scale, shear. Output pixels are sampled bilinearly from the inverse map;
/// samples falling outside the source are 0.
ImageSample apply_augment(const ImageSample& image, const AugmentParams& params);

ImageSample augment(const ImageSample& image, const AugmentSpec& spec, std::uint64_t draw_seed);

}  // namespace imda::data
