#pragma once

#include <filesystem>

#include "imda/data/image.hpp"

namespace imda::data {

/// Reads an 8-bit PNG as grayscale. Color and 16-bit inputs are reduced.
ImageSample read_png(const std::filesystem::path& path);

/// Writes pixels rounded and clamped to 8-bit grayscale.
void write_png(const std::filesystem::path& path, const ImageSample& image);

}  // namespace imda::data
