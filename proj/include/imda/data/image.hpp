#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace imda::data {

enum class Label : int { benign = 0, malware = 1 };

const char* to_string(Label label);
Label parse_label(std::string_view text);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BinarySample {
  std::vector<std::uint8_t> bytes;
  Label label = Label::benign;
  std::string source_path;
};

struct AugmentParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double shear = 0.0;
  bool reflect = false;

  bool operator==(const AugmentParams&) const = default;
};

enum class Provenance { converted, loaded, augmented };

/// Grayscale raster with intensities in [0, 255], row-major.
struct ImageSample {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  Label label = Label::benign;
  std::string source_path;
  Provenance provenance = Provenance::loaded;
  std::optional<AugmentParams> augment;

  float at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

/// Row width for a file of `size` bytes: <10KB 32, <30KB 64, <60KB 128,
/// <100KB 256, <200KB 384, <500KB 512, <1000KB 768, otherwise 1024 (KB = 1024).
std::size_t width_for_size(std::size_t size);

/// Raster the bytes row by row; the last row is zero-padded.
ImageSample bytes_to_image(const BinarySample& sample, std::optional<std::size_t> width = std::nullopt);

/// Reads the first `count` raster cells back as bytes.
std::vector<std::uint8_t> image_bytes(const ImageSample& image, std::size_t count);

/// Bilinear resampling with half-pixel centers; output clamped to [0, 255].
ImageSample resize(const ImageSample& image, std::size_t height, std::size_t width);

inline float normalize_pixel(float v) { return v / 255.0f; }
inline float denormalize_pixel(float v) { return v * 255.0f; }

}  // namespace imda::data
