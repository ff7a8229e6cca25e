#include "imda/data/image.hpp"

#include <algorithm>
#include <cmath>

namespace imda::data {

const char* to_string(Label label) { return label == Label::malware ? "malware" : "benign"; }

Label parse_label(std::string_view text) {
  if (text == "benign" || text == "0") return Label::benign;
  if (text == "malware" || text == "1") return Label::malware;
  throw DataError("unknown class label '" + std::string(text) + "'");
}

std::size_t width_for_size(std::size_t size) {
  constexpr std::size_t kb = 1024;
  if (size < 10 * kb) return 32;
  if (size < 30 * kb) return 64;
  if (size < 60 * kb) return 128;
  if (size < 100 * kb) return 256;
  if (size < 200 * kb) return 384;
  if (size < 500 * kb) return 512;
  if (size < 1000 * kb) return 768;
  return 1024;
}

ImageSample bytes_to_image(const BinarySample& sample, std::optional<std::size_t> width) {
  if (sample.bytes.empty()) throw DataError("cannot render an empty byte sequence: " + sample.source_path);
  const std::size_t w = width.value_or(width_for_size(sample.bytes.size()));
  if (w == 0) throw DataError("image width must be positive");
  ImageSample image;
  image.width = w;
  image.height = (sample.bytes.size() + w - 1) / w;
  image.pixels.assign(image.height * w, 0.0f);
  std::copy(sample.bytes.begin(), sample.bytes.end(), image.pixels.begin());
  image.label = sample.label;
  image.source_path = sample.source_path;
  image.provenance = Provenance::converted;
  return image;
}

std::vector<std::uint8_t> image_bytes(const ImageSample& image, std::size_t count) {
  if (count > image.pixels.size()) throw DataError("requested more bytes than the image holds");
  std::vector<std::uint8_t> bytes(count);
  for (std::size_t i = 0; i < count; ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::clamp(std::lround(image.pixels[i]), 0L, 255L));
  }
  return bytes;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> resample_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[o] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

ImageSample resize(const ImageSample& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DataError("resize target extents must be positive");
  if (image.height == 0 || image.width == 0) throw DataError("cannot resize an empty image");
  ImageSample out = image;
  out.height = height;
  out.width = width;
  out.pixels.assign(height * width, 0.0f);
  const auto rows = resample_taps(image.height, height);
  const auto cols = resample_taps(image.width, width);
  for (std::size_t r = 0; r < height; ++r) {
    const Tap& ty = rows[r];
    for (std::size_t c = 0; c < width; ++c) {
      const Tap& tx = cols[c];
      const double v00 = image.at(ty.lo, tx.lo), v01 = image.at(ty.lo, tx.hi);
      const double v10 = image.at(ty.hi, tx.lo), v11 = image.at(ty.hi, tx.hi);
      const double top = v00 + tx.frac * (v01 - v00);
      const double bottom = v10 + tx.frac * (v11 - v10);
      const double v = top + ty.frac * (bottom - top);
      out.pixels[r * width + c] = static_cast<float>(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace imda::data
