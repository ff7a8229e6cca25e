#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "imda/data/dataset.hpp"

namespace imda::train {

enum class Side { train, test };

const char* to_string(Side side);

struct SplitManifest {
  std::vector<Side> sides;  // one per sample, in dataset order
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::array<std::size_t, 2> train_count{};  // indexed by Label
  std::array<std::size_t, 2> test_count{};

  std::vector<std::size_t> indices(Side side) const;
};

/// Per class, samples are ranked by a seeded hash of their path and the
/// first round(n * fraction) go to the test side. The result does not depend
/// on the order samples are listed in.
SplitManifest stratified_split(std::span<const std::string> paths, std::span<const data::Label> labels,
                               double test_fraction, std::uint64_t seed);

SplitManifest stratified_split(const data::Dataset& dataset, double test_fraction, std::uint64_t seed);

/// CSV with header path,class,split.
void write_split(const std::filesystem::path& path, const data::Dataset& dataset, const SplitManifest& split);

/// Reassigns sides from a split CSV by path. Samples absent from the file are
/// an error.
SplitManifest read_split(const std::filesystem::path& path, const data::Dataset& dataset);

}  // namespace imda::train
